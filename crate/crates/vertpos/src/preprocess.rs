//! Null-value removal, 3-sigma abnormal-data exclusion, and feature scaling.

use crate::data::{feature_name, Dataset, Field, FeatureVector};
use crate::error::{Error, Result};

/// Sample mean and standard deviation (n-1 denominator) over `n` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and n-1 standard deviation of `values`; needs at least two.
pub fn sigma_stats(values: &[f64]) -> Result<SigmaStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let std = (ss / (n - 1) as f64).sqrt();
    Ok(SigmaStats { mean, std, n })
}

/// Indices kept/removed by the 3-sigma rule over one value sequence.
///
/// A value is removed iff `|x - mean| >= 3 * std`. With `std == 0` nothing
/// is removed (a strict reading would discard everything).
pub fn three_sigma_indices(values: &[f64]) -> Result<(Vec<usize>, Vec<usize>, SigmaStats)> {
    let stats = sigma_stats(values)?;
    let mut kept = Vec::with_capacity(values.len());
    let mut removed = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if stats.std > 0.0 && (v - stats.mean).abs() >= 3.0 * stats.std {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok((kept, removed, stats))
}

/// Result of applying the 3-sigma rule to a dataset.
#[derive(Debug, Clone)]
pub struct SigmaFilterOutcome {
    /// Indices retained, in input order.
    pub kept: Vec<usize>,
    /// Indices removed, in input order.
    pub removed: Vec<usize>,
    /// Per-field statistics computed over the full input.
    pub stats: Vec<(Field, SigmaStats)>,
}

/// Apply the 3-sigma rule over each monitored field of `data`.
///
/// A record is removed iff it is extreme in any monitored field. The
/// per-field statistics are computed over the whole input, not iteratively.
/// Every monitored field must be present on every record.
pub fn three_sigma_filter(data: &Dataset, monitored: &[Field]) -> Result<SigmaFilterOutcome> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut stats = Vec::with_capacity(monitored.len());
    let mut removed_flags = vec![false; n];
    for &field in monitored {
        let mut values = Vec::with_capacity(n);
        for obs in &data.points {
            match obs.value(field) {
                Some(v) => values.push(v),
                None => return Err(Error::MissingField { field: field.name() }),
            }
        }
        let (_, removed, field_stats) = three_sigma_indices(&values)?;
        for i in removed {
            removed_flags[i] = true;
        }
        stats.push((field, field_stats));
    }
    let mut kept = Vec::with_capacity(n);
    let mut removed = Vec::new();
    for (i, &flag) in removed_flags.iter().enumerate() {
        if flag {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok(SigmaFilterOutcome {
        kept,
        removed,
        stats,
    })
}

/// Keep only the records where every `required` field is present.
pub fn drop_missing(data: &Dataset, required: &[Field]) -> Result<Dataset> {
    let points: Vec<_> = data
        .points
        .iter()
        .filter(|obs| required.iter().all(|&f| obs.has(f)))
        .cloned()
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset::new(points, data.provenance.clone()))
}

/// Per-feature z-score standardizer fitted on training data only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Identity scaler of dimension `dim` (mean 0, std 1).
    pub fn identity(dim: usize) -> Self {
        Scaler {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

/// Fit per-feature mean and n-1 standard deviation.
///
/// Every feature must vary; a constant column is reported by name.
pub fn fit_scaler(train: &[FeatureVector]) -> Result<Scaler> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let dim = train[0].dim();
    for v in train {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
    }
    let mut means = vec![0.0; dim];
    for v in train {
        for (m, x) in means.iter_mut().zip(v.values()) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; dim];
    for v in train {
        for ((s, x), m) in stds.iter_mut().zip(v.values()).zip(&means) {
            *s += (x - m) * (x - m);
        }
    }
    for (i, s) in stds.iter_mut().enumerate() {
        *s = (*s / (n - 1) as f64).sqrt();
        if *s == 0.0 {
            return Err(Error::ZeroVarianceFeature {
                name: feature_name(i),
            });
        }
    }
    Ok(Scaler { means, stds })
}

/// Standardize `x` entrywise: `(x_i - mean_i) / std_i`.
pub fn apply_scaler(scaler: &Scaler, x: &FeatureVector) -> Result<FeatureVector> {
    if x.dim() != scaler.dim() {
        return Err(Error::DimensionMismatch {
            expected: scaler.dim(),
            got: x.dim(),
        });
    }
    let values = x
        .values()
        .iter()
        .zip(&scaler.means)
        .zip(&scaler.stds)
        .map(|((v, m), s)| (v - m) / s)
        .collect();
    FeatureVector::new(values)
}

/// Per-feature min-max bounds for the optional [0, 1] rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

/// Fit per-feature minima and maxima; constant columns are rejected.
pub fn fit_minmax(train: &[FeatureVector]) -> Result<MinMaxScaler> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let dim = train[0].dim();
    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    for v in train {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
        for ((lo, hi), x) in mins.iter_mut().zip(maxs.iter_mut()).zip(v.values()) {
            *lo = lo.min(*x);
            *hi = hi.max(*x);
        }
    }
    for i in 0..dim {
        if mins[i] == maxs[i] {
            return Err(Error::ZeroVarianceFeature {
                name: feature_name(i),
            });
        }
    }
    Ok(MinMaxScaler { mins, maxs })
}

/// Rescale `x` entrywise to `(x_i - min_i) / (max_i - min_i)`.
pub fn apply_minmax(scaler: &MinMaxScaler, x: &FeatureVector) -> Result<FeatureVector> {
    if x.dim() != scaler.mins.len() {
        return Err(Error::DimensionMismatch {
            expected: scaler.mins.len(),
            got: x.dim(),
        });
    }
    let values = x
        .values()
        .iter()
        .zip(&scaler.mins)
        .zip(&scaler.maxs)
        .map(|((v, lo), hi)| (v - lo) / (hi - lo))
        .collect();
    FeatureVector::new(values)
}
