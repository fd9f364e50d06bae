//! Multinomial logistic regression with a group-l1 regularizer on a feature
//! subset, trained by monotone proximal gradient descent.
//!
//! The objective is `f(W) + lambda * eta_S(W)` where `f` is the summed
//! negative log-likelihood of the softmax model and `eta_S` penalizes, for
//! each selected feature, the l1 norm of that feature's coefficients across
//! all classes. Coordinates outside the subset are frozen at zero: the model
//! never reads off-subset features.

use std::io::{BufRead, Write};

use crate::data::{format_f64, FeatureVector, LabeledPoint};
use crate::error::{Error, Result};
use crate::preprocess::Scaler;
use crate::quantize::QuantizationScheme;

/// Row-major K x I coefficient matrix; row `k` (0-based) holds the weight
/// vector of class `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix {
    entries: Vec<f64>,
    num_classes: usize,
    dim: usize,
}

impl ParameterMatrix {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        ParameterMatrix {
            entries: vec![0.0; num_classes * dim],
            num_classes,
            dim,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_classes = rows.len();
        if num_classes == 0 {
            return Err(Error::InvalidConfig("parameter matrix needs rows".into()));
        }
        let dim = rows[0].len();
        let mut entries = Vec::with_capacity(num_classes * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite entry {bad}")));
        }
        Ok(ParameterMatrix {
            entries,
            num_classes,
            dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, class_row: usize, feature: usize) -> f64 {
        self.entries[class_row * self.dim + feature]
    }

    pub fn set(&mut self, class_row: usize, feature: usize, value: f64) {
        self.entries[class_row * self.dim + feature] = value;
    }

    pub fn row(&self, class_row: usize) -> &[f64] {
        &self.entries[class_row * self.dim..(class_row + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Solver knobs. Defaults: tolerance 1e-6 on the proximal-gradient-mapping
/// norm, at most 5000 iterations, plain (non-accelerated) steps.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Nesterov-style extrapolation with a monotone safeguard. The objective
    /// trace stays nonincreasing either way.
    pub accelerate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iters: 5000,
            accelerate: true,
        }
    }
}

/// What the trainer did: accepted-iterate objective values, first entry is
/// the objective at the zero start.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// A trained multinomial logistic regression model plus everything needed
/// to reproduce its predictions: feature subset, quantization scheme and the
/// scaler its training features were standardized with.
#[derive(Debug, Clone, PartialEq)]
pub struct MlrModel {
    pub params: ParameterMatrix,
    /// Sorted 0-based feature indices; `params` is zero outside them.
    pub subset: Vec<usize>,
    pub scheme: QuantizationScheme,
    pub scaler: Scaler,
    pub lambda: f64,
}

impl MlrModel {
    /// Per-class linear scores `w_k . x` for an already-scaled input.
    pub fn linear_scores(&self, x_scaled: &FeatureVector) -> Result<Vec<f64>> {
        if x_scaled.dim() != self.params.dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim,
                got: x_scaled.dim(),
            });
        }
        let xs = x_scaled.values();
        Ok((0..self.params.num_classes)
            .map(|k| {
                self.subset
                    .iter()
                    .map(|&i| self.params.get(k, i) * xs[i])
                    .sum()
            })
            .collect())
    }

    /// 1-based class with the highest score; ties break toward the lower
    /// index. Equal to the argmax over softmax probabilities.
    pub fn predict_class(&self, x_scaled: &FeatureVector) -> Result<usize> {
        let scores = self.linear_scores(x_scaled)?;
        Ok(argmax_low(&scores) + 1)
    }

    /// Class-center altitude for the predicted class.
    pub fn predict_altitude(&self, x_scaled: &FeatureVector) -> Result<f64> {
        self.scheme.predicted_altitude(self.predict_class(x_scaled)?)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax: probabilities are positive, sum to one and
/// are invariant to adding a constant to every score.
pub fn softmax_probabilities(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn check_labels(data: &[LabeledPoint], num_classes: usize) -> Result<()> {
    for p in data {
        if p.class_label < 1 || p.class_label > num_classes {
            return Err(Error::LabelOutOfRange {
                label: p.class_label,
                num_classes,
            });
        }
    }
    Ok(())
}

/// Summed negative log-likelihood `f(W)` over `data`.
///
/// At `W = 0` this is exactly `N ln K`.
pub fn nll_objective(params: &ParameterMatrix, data: &[LabeledPoint]) -> Result<f64> {
    check_labels(data, params.num_classes)?;
    let mut f = 0.0;
    let mut scores = vec![0.0; params.num_classes];
    for p in data {
        if p.features.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                got: p.features.dim(),
            });
        }
        let xs = p.features.values();
        for (k, s) in scores.iter_mut().enumerate() {
            *s = params
                .row(k)
                .iter()
                .zip(xs)
                .map(|(w, x)| w * x)
                .sum();
        }
        f += -scores[p.class_label - 1] + log_sum_exp(&scores);
    }
    Ok(f)
}

/// Gradient of the negative log-likelihood, restricted to `subset` columns
/// (zero elsewhere): row `k` is `sum_n (P(k|x_n) - [y_n = k]) x_n`.
pub fn nll_gradient(
    params: &ParameterMatrix,
    data: &[LabeledPoint],
    subset: &[usize],
) -> Result<ParameterMatrix> {
    check_labels(data, params.num_classes)?;
    let mut grad = ParameterMatrix::zeros(params.num_classes, params.dim);
    let mut scores = vec![0.0; params.num_classes];
    for p in data {
        if p.features.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                got: p.features.dim(),
            });
        }
        let xs = p.features.values();
        for (k, s) in scores.iter_mut().enumerate() {
            *s = params
                .row(k)
                .iter()
                .zip(xs)
                .map(|(w, x)| w * x)
                .sum();
        }
        let probs = softmax_probabilities(&scores);
        for (k, &pk) in probs.iter().enumerate() {
            let coef = pk - if p.class_label == k + 1 { 1.0 } else { 0.0 };
            for &i in subset {
                let v = grad.get(k, i) + coef * xs[i];
                grad.set(k, i, v);
            }
        }
    }
    Ok(grad)
}

/// Group-l1 penalty `eta_S(W) = sum_{i in S} sum_k |W[k, i]|`.
pub fn group_l1_penalty(params: &ParameterMatrix, subset: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&i| {
            (0..params.num_classes)
                .map(|k| params.get(k, i).abs())
                .sum::<f64>()
        })
        .sum()
}

fn validate_subset(subset: &[usize], dim: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("feature subset is empty".into()));
    }
    for pair in subset.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidConfig(format!(
                "feature subset must be strictly increasing, got {subset:?}"
            )));
        }
    }
    if *subset.last().unwrap() >= dim {
        return Err(Error::InvalidConfig(format!(
            "feature index {} out of range for dimension {dim}",
            subset.last().unwrap()
        )));
    }
    Ok(())
}

/// Fit the group-l1-regularized model on `data` over the given feature
/// subset.
///
/// Deterministic: starts from the zero matrix and uses backtracking proximal
/// gradient steps that never increase the composite objective. Terminates
/// when the proximal-gradient-mapping norm drops below `opts.tol` or after
/// `opts.max_iters` iterations (the report then carries `converged = false`).
pub fn train(
    data: &[LabeledPoint],
    subset: &[usize],
    lambda: f64,
    opts: &SolverOptions,
    scheme: &QuantizationScheme,
    scaler: &Scaler,
) -> Result<(MlrModel, TrainReport)> {
    let k = scheme.num_classes;
    let dim = scaler.dim();
    if data.len() < k {
        return Err(Error::DegenerateData(format!(
            "need at least K = {k} training points, got {}",
            data.len()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    validate_subset(subset, dim)?;
    check_labels(data, k)?;
    for p in data {
        if p.features.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.features.dim(),
            });
        }
    }

    let problem = Problem::new(data, subset, k);
    let (w_active, report) = solve_prox_gradient(&problem, lambda, opts);

    let mut params = ParameterMatrix::zeros(k, dim);
    for (row, chunk) in w_active.chunks(subset.len()).enumerate() {
        for (&i, &v) in subset.iter().zip(chunk) {
            params.set(row, i, v);
        }
    }
    let model = MlrModel {
        params,
        subset: subset.to_vec(),
        scheme: *scheme,
        scaler: scaler.clone(),
        lambda,
    };
    Ok((model, report))
}

/// Training data packed down to the active feature columns.
struct Problem {
    /// N x r, row-major.
    xs: Vec<f64>,
    /// 0-based labels.
    labels: Vec<usize>,
    n: usize,
    r: usize,
    k: usize,
}

impl Problem {
    fn new(data: &[LabeledPoint], subset: &[usize], k: usize) -> Self {
        let r = subset.len();
        let mut xs = Vec::with_capacity(data.len() * r);
        let mut labels = Vec::with_capacity(data.len());
        for p in data {
            let values = p.features.values();
            for &i in subset {
                xs.push(values[i]);
            }
            labels.push(p.class_label - 1);
        }
        Problem {
            xs,
            labels,
            n: data.len(),
            r,
            k,
        }
    }

    /// Negative log-likelihood at the active-block weights `w` (K x r).
    fn objective(&self, w: &[f64]) -> f64 {
        let mut f = 0.0;
        let mut scores = vec![0.0; self.k];
        for n in 0..self.n {
            let x = &self.xs[n * self.r..(n + 1) * self.r];
            for (kk, s) in scores.iter_mut().enumerate() {
                *s = w[kk * self.r..(kk + 1) * self.r]
                    .iter()
                    .zip(x)
                    .map(|(wv, xv)| wv * xv)
                    .sum();
            }
            f += -scores[self.labels[n]] + log_sum_exp(&scores);
        }
        f
    }

    /// Objective and gradient together (one softmax pass).
    fn objective_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        let mut scores = vec![0.0; self.k];
        for n in 0..self.n {
            let x = &self.xs[n * self.r..(n + 1) * self.r];
            for (kk, s) in scores.iter_mut().enumerate() {
                *s = w[kk * self.r..(kk + 1) * self.r]
                    .iter()
                    .zip(x)
                    .map(|(wv, xv)| wv * xv)
                    .sum();
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for s in &scores {
                z += (s - max).exp();
            }
            f += -scores[self.labels[n]] + max + z.ln();
            for kk in 0..self.k {
                let p = (scores[kk] - max).exp() / z;
                let coef = p - if self.labels[n] == kk { 1.0 } else { 0.0 };
                let row = &mut grad[kk * self.r..(kk + 1) * self.r];
                for (g, xv) in row.iter_mut().zip(x) {
                    *g += coef * xv;
                }
            }
        }
        f
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// Monotone proximal gradient with backtracking line search.
///
/// The step warm-starts from the previously accepted step size (growing by
/// 2x on acceptance, the first iteration starts at 1.0) and halves until the
/// composite objective satisfies an Armijo-type sufficient decrease. With
/// `accelerate` an extrapolated candidate is tried first and discarded
/// whenever it would break monotonicity.
fn solve_prox_gradient(problem: &Problem, lambda: f64, opts: &SolverOptions) -> (Vec<f64>, TrainReport) {
    let size = problem.k * problem.r;
    let mut w = vec![0.0; size];
    let mut grad = vec![0.0; size];
    let mut f_w = problem.objective_grad(&w, &mut grad);
    let mut composite = f_w; // penalty of 0 is 0
    let mut trace = vec![composite];

    let mut w_prev = w.clone();
    let mut momentum = 1.0f64;
    let mut step = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    let mut y = vec![0.0; size];
    let mut grad_y = vec![0.0; size];
    let mut candidate = vec![0.0; size];

    for iter in 1..=opts.max_iters {
        iterations = iter;

        // Extrapolation point. On the first iteration (or with acceleration
        // off) this is just the current iterate, whose gradient we already
        // have.
        let use_momentum = opts.accelerate && iter > 1;
        let (f_base, base_is_w) = if use_momentum {
            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            momentum = next_momentum;
            for i in 0..size {
                y[i] = w[i] + beta * (w[i] - w_prev[i]);
            }
            (problem.objective_grad(&y, &mut grad_y), false)
        } else {
            y.copy_from_slice(&w);
            grad_y.copy_from_slice(&grad);
            (f_w, true)
        };

        // Backtracking from the extrapolated point.
        let mut accepted = try_backtracking(
            problem, lambda, &y, f_base, &grad_y, &mut step, &mut candidate,
        );

        // Monotone safeguard: an extrapolated step may only be kept when it
        // does not increase the composite objective; otherwise fall back to
        // a plain step from w and restart the momentum sequence.
        if accepted.is_some() && !base_is_w {
            let cand_composite = accepted.unwrap();
            if cand_composite > composite {
                accepted = None;
            }
        }
        if accepted.is_none() && !base_is_w {
            momentum = 1.0;
            y.copy_from_slice(&w);
            problem.objective_grad(&w, &mut grad_y);
            accepted = try_backtracking(
                problem, lambda, &y, f_w, &grad_y, &mut step, &mut candidate,
            );
        }

        let Some(cand_composite) = accepted else {
            // No step of any size decreases the objective: numerically at a
            // stationary point.
            converged = true;
            break;
        };
        if cand_composite > composite {
            // Plain step that cannot improve the composite: stop.
            converged = true;
            break;
        }

        let mapping_sq: f64 = candidate
            .iter()
            .zip(&y)
            .map(|(c, yv)| (c - yv) * (c - yv))
            .sum();
        let mapping_norm = mapping_sq.sqrt() / step;

        w_prev.copy_from_slice(&w);
        w.copy_from_slice(&candidate);
        composite = cand_composite;
        trace.push(composite);
        f_w = problem.objective_grad(&w, &mut grad);

        if mapping_norm < opts.tol {
            converged = true;
            break;
        }
        step *= 2.0;
    }

    (
        w,
        TrainReport {
            final_objective: composite,
            iterations,
            converged,
            objective_trace: trace,
        },
    )
}

/// Shrink `step` until the proximal candidate from `base` satisfies the
/// sufficient-decrease condition; returns the candidate's composite
/// objective, or `None` when the step underflows.
fn try_backtracking(
    problem: &Problem,
    lambda: f64,
    base: &[f64],
    f_base: f64,
    grad_base: &[f64],
    step: &mut f64,
    candidate: &mut [f64],
) -> Option<f64> {
    let base_composite = f_base + lambda * l1(base);
    loop {
        let mut dist_sq = 0.0;
        for i in 0..base.len() {
            candidate[i] = soft_threshold(base[i] - *step * grad_base[i], *step * lambda);
            let d = candidate[i] - base[i];
            dist_sq += d * d;
        }
        if dist_sq == 0.0 {
            // prox fixed point at this step size
            return Some(base_composite);
        }
        let f_cand = problem.objective(candidate);
        let cand_composite = f_cand + lambda * l1(candidate);
        if cand_composite <= base_composite - 0.5 * dist_sq / (2.0 * *step) {
            return Some(cand_composite);
        }
        *step *= 0.5;
        if *step < 1e-18 {
            return None;
        }
    }
}

const MODEL_MAGIC: &str = "vertpos-mlr v1";

impl MlrModel {
    /// Flat text serialization; floats use shortest round-trip formatting,
    /// so read-back is bit-exact.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{MODEL_MAGIC}")?;
        writeln!(out, "classes {}", self.params.num_classes)?;
        writeln!(out, "dim {}", self.params.dim)?;
        writeln!(out, "lambda {}", format_f64(self.lambda))?;
        let subset: Vec<String> = self.subset.iter().map(|i| i.to_string()).collect();
        writeln!(out, "subset {}", subset.join(" "))?;
        writeln!(out, "{}", self.scheme.to_text())?;
        writeln!(out, "scaler_mean {}", join_f64(&self.scaler.means))?;
        writeln!(out, "scaler_std {}", join_f64(&self.scaler.stds))?;
        writeln!(out, "omega")?;
        for k in 0..self.params.num_classes {
            writeln!(out, "{}", join_f64(self.params.row(k)))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = Lines::new(input)?;
        lines.expect(MODEL_MAGIC)?;
        let num_classes = lines.tagged_usize("classes")?;
        let dim = lines.tagged_usize("dim")?;
        let lambda = lines.tagged_f64("lambda")?;
        let subset = lines.tagged_usize_list("subset")?;
        let scheme = QuantizationScheme::from_text(&lines.next_line()?)?;
        let means = lines.tagged_f64_list("scaler_mean")?;
        let stds = lines.tagged_f64_list("scaler_std")?;
        lines.expect("omega")?;
        let mut rows = Vec::with_capacity(num_classes);
        for _ in 0..num_classes {
            let row = parse_f64_list(&lines.next_line()?)?;
            if row.len() != dim {
                return Err(Error::BadModelFile(format!(
                    "omega row has {} entries, expected {dim}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if means.len() != dim || stds.len() != dim {
            return Err(Error::BadModelFile("scaler dimension mismatch".into()));
        }
        if scheme.num_classes != num_classes {
            return Err(Error::BadModelFile(format!(
                "scheme has {} classes, header says {num_classes}",
                scheme.num_classes
            )));
        }
        validate_subset(&subset, dim)?;
        Ok(MlrModel {
            params: ParameterMatrix::from_rows(rows)?,
            subset,
            scheme,
            scaler: Scaler { means, stds },
            lambda,
        })
    }
}

pub(crate) fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format_f64(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_f64_list(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::BadModelFile(format!("bad float '{tok}'")))
        })
        .collect()
}

/// Line-oriented reader for the flat model format.
pub(crate) struct Lines {
    buffer: Vec<String>,
    next: usize,
}

impl Lines {
    pub(crate) fn new<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut buffer = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::BadModelFile(e.to_string()))?;
            buffer.push(line);
        }
        Ok(Lines { buffer, next: 0 })
    }

    pub(crate) fn next_line(&mut self) -> Result<String> {
        let line = self
            .buffer
            .get(self.next)
            .ok_or_else(|| Error::BadModelFile("unexpected end of file".into()))?;
        self.next += 1;
        Ok(line.clone())
    }

    pub(crate) fn peek(&self) -> Option<&str> {
        self.buffer.get(self.next).map(|s| s.as_str())
    }

    pub(crate) fn expect(&mut self, exact: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != exact {
            return Err(Error::BadModelFile(format!(
                "expected '{exact}', found '{line}'"
            )));
        }
        Ok(())
    }

    fn tagged(&mut self, tag: &str) -> Result<String> {
        let line = self.next_line()?;
        line.strip_prefix(tag)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(|rest| rest.to_string())
            .ok_or_else(|| Error::BadModelFile(format!("expected '{tag} ...', found '{line}'")))
    }

    pub(crate) fn tagged_usize(&mut self, tag: &str) -> Result<usize> {
        let raw = self.tagged(tag)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::BadModelFile(format!("bad integer '{raw}'")))
    }

    pub(crate) fn tagged_f64(&mut self, tag: &str) -> Result<f64> {
        let raw = self.tagged(tag)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::BadModelFile(format!("bad float '{raw}'")))
    }

    pub(crate) fn tagged_f64_list(&mut self, tag: &str) -> Result<Vec<f64>> {
        parse_f64_list(&self.tagged(tag)?)
    }

    pub(crate) fn tagged_usize_list(&mut self, tag: &str) -> Result<Vec<usize>> {
        self.tagged(tag)?
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::BadModelFile(format!("bad index '{tok}'")))
            })
            .collect()
    }
}
