//! Per-device trace grouping and the pairwise spherical-distance outlier
//! vote: a point is an outlier when more than half of its distances to the
//! rest of the trace exceed `d_max = mean_speed * duration`.

use std::collections::HashMap;
use std::io::Write;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::geo::{diameter_threshold, haversine_distance, EarthModel, GeoPoint};

/// Observations from one device within one time window, sorted by time.
#[derive(Debug, Clone)]
pub struct Trace {
    pub device_id: String,
    pub observations: Vec<Observation>,
    /// Last timestamp minus first, seconds.
    pub duration: f64,
    /// Arithmetic mean of the recorded speed fields; observations without a
    /// speed are excluded from the mean. Zero when no speeds are present.
    pub mean_speed: f64,
}

impl Trace {
    pub fn new(device_id: impl Into<String>, mut observations: Vec<Observation>) -> Self {
        observations.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite timestamps"));
        let duration = match (observations.first(), observations.last()) {
            (Some(first), Some(last)) => last.time - first.time,
            _ => 0.0,
        };
        let speeds: Vec<f64> = observations.iter().filter_map(|o| o.speed).collect();
        let mean_speed = if speeds.is_empty() {
            0.0
        } else {
            speeds.iter().sum::<f64>() / speeds.len() as f64
        };
        Trace {
            device_id: device_id.into(),
            observations,
            duration,
            mean_speed,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn geo_point(&self, i: usize) -> GeoPoint {
        let obs = &self.observations[i];
        GeoPoint {
            longitude: obs.longitude,
            latitude: obs.latitude,
        }
    }
}

/// The vote outcome for one trace position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierVerdict {
    pub index: usize,
    /// Fraction of this point's distances that exceed `d_max`, in [0, 1].
    pub exceed_fraction: f64,
    /// True iff `exceed_fraction > 0.5`; ties are not outliers.
    pub is_outlier: bool,
}

/// Partition `data` by device id (first-appearance order), then split each
/// device's time-sorted records wherever consecutive timestamps are more
/// than `window` seconds apart.
pub fn group_traces(data: &Dataset, window: f64) -> Vec<Trace> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_device: HashMap<&str, Vec<&Observation>> = HashMap::new();
    for obs in &data.points {
        by_device
            .entry(obs.device_id.as_str())
            .or_insert_with(|| {
                order.push(obs.device_id.as_str());
                Vec::new()
            })
            .push(obs);
    }

    let mut traces = Vec::new();
    for device in order {
        let mut observations: Vec<Observation> =
            by_device[device].iter().map(|&o| o.clone()).collect();
        observations.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite timestamps"));
        let mut current: Vec<Observation> = Vec::new();
        for obs in observations {
            if let Some(last) = current.last() {
                if obs.time - last.time > window {
                    traces.push(Trace::new(device, std::mem::take(&mut current)));
                }
            }
            current.push(obs);
        }
        if !current.is_empty() {
            traces.push(Trace::new(device, current));
        }
    }
    traces
}

/// Full symmetric matrix of pairwise great-circle distances in meters.
pub fn pairwise_distance_matrix(trace: &Trace, earth: &EarthModel) -> Result<Vec<Vec<f64>>> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::TraceTooShort { needed: 2, got: n });
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = haversine_distance(trace.geo_point(i), trace.geo_point(j), earth);
            matrix[i][j] = d;
            matrix[j][i] = d;
        }
    }
    Ok(matrix)
}

/// Run the majority-distance vote over one trace.
///
/// Needs at least three points so every point has two or more distances.
pub fn detect_outliers(trace: &Trace, earth: &EarthModel) -> Result<Vec<OutlierVerdict>> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::TraceTooShort { needed: 3, got: n });
    }
    let matrix = pairwise_distance_matrix(trace, earth)?;
    Ok(verdicts_from_matrix(&matrix, trace.mean_speed, trace.duration))
}

/// The vote applied to a precomputed distance matrix.
pub fn verdicts_from_matrix(
    matrix: &[Vec<f64>],
    mean_speed: f64,
    duration: f64,
) -> Vec<OutlierVerdict> {
    let n = matrix.len();
    let d_max = diameter_threshold(mean_speed, duration);
    (0..n)
        .map(|i| {
            let exceed = matrix[i]
                .iter()
                .enumerate()
                .filter(|&(j, &d)| j != i && d > d_max)
                .count();
            let exceed_fraction = exceed as f64 / (n - 1) as f64;
            OutlierVerdict {
                index: i,
                exceed_fraction,
                is_outlier: exceed_fraction > 0.5,
            }
        })
        .collect()
}

/// Write verdicts as CSV rows `device_id,index,exceed_fraction,is_outlier`
/// (header included).
pub fn write_verdicts_csv<W: Write>(
    out: &mut W,
    verdicts: &[(String, Vec<OutlierVerdict>)],
) -> std::io::Result<()> {
    writeln!(out, "device_id,index,exceed_fraction,is_outlier")?;
    for (device, vs) in verdicts {
        for v in vs {
            writeln!(
                out,
                "{},{},{},{}",
                device, v.index, v.exceed_fraction, v.is_outlier
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(device: &str, time: f64, lon: f64, lat: f64, speed: f64) -> Observation {
        Observation {
            device_id: device.into(),
            time,
            longitude: lon,
            latitude: lat,
            speed: Some(speed),
            pressure: Some(1020.0),
            altitude: Some(10.0),
        }
    }

    const EARTH: EarthModel = EarthModel {
        radius_m: crate::geo::MEAN_EARTH_RADIUS_M,
    };

    #[test]
    fn groups_by_device() {
        let points = vec![
            obs("a", 0.0, 121.5, 31.2, 1.0),
            obs("b", 1.0, 121.5, 31.2, 1.0),
            obs("a", 2.0, 121.5, 31.2, 1.0),
            obs("b", 3.0, 121.5, 31.2, 1.0),
        ];
        let traces = group_traces(&Dataset::new(points, "test"), 3600.0);
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].device_id, "a");
        assert_eq!(traces[1].device_id, "b");
        assert_eq!(traces[0].len(), 2);
    }

    #[test]
    fn splits_on_time_gaps() {
        let points = vec![
            obs("a", 0.0, 121.5, 31.2, 1.0),
            obs("a", 10.0, 121.5, 31.2, 1.0),
            obs("a", 20.0, 121.5, 31.2, 1.0),
            obs("a", 10_000.0, 121.5, 31.2, 1.0),
        ];
        let traces = group_traces(&Dataset::new(points, "test"), 3600.0);
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].len(), 3);
        assert_eq!(traces[1].len(), 1);
        assert_eq!(traces[0].duration, 20.0);
    }

    #[test]
    fn matrix_of_identical_points_is_zero() {
        let trace = Trace::new(
            "a",
            vec![obs("a", 0.0, 121.5, 31.2, 0.0), obs("a", 1.0, 121.5, 31.2, 0.0)],
        );
        let m = pairwise_distance_matrix(&trace, &EARTH).unwrap();
        assert_eq!(m, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn collinear_equatorial_distances_scale_linearly() {
        let trace = Trace::new(
            "a",
            vec![
                obs("a", 0.0, 0.0, 0.0, 1.0),
                obs("a", 1.0, 0.001, 0.0, 1.0),
                obs("a", 2.0, 0.002, 0.0, 1.0),
            ],
        );
        let m = pairwise_distance_matrix(&trace, &EARTH).unwrap();
        assert!((m[0][2] - 2.0 * m[0][1]).abs() / m[0][2] < 1e-4);
    }

    #[test]
    fn matrix_is_exactly_symmetric() {
        let trace = Trace::new(
            "a",
            vec![
                obs("a", 0.0, 121.51, 31.21, 1.0),
                obs("a", 1.0, 121.52, 31.22, 1.0),
                obs("a", 2.0, 121.53, 31.20, 1.0),
            ],
        );
        let m = pairwise_distance_matrix(&trace, &EARTH).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn trace_too_short_is_an_error() {
        let trace = Trace::new("a", vec![obs("a", 0.0, 121.5, 31.2, 1.0)]);
        assert!(matches!(
            pairwise_distance_matrix(&trace, &EARTH),
            Err(Error::TraceTooShort { .. })
        ));
        assert!(matches!(
            detect_outliers(&trace, &EARTH),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn stationary_trace_flags_only_the_distant_point() {
        // nine identical points with zero speed, one point ~100 m away;
        // d_max = 0, so the distant point exceeds on 9/9 distances and the
        // rest on 1/9 each
        let mut points: Vec<Observation> = (0..9)
            .map(|i| obs("a", i as f64, 121.5, 31.2, 0.0))
            .collect();
        points.push(obs("a", 9.0, 121.501, 31.2, 0.0));
        let trace = Trace::new("a", points);
        let verdicts = detect_outliers(&trace, &EARTH).unwrap();
        assert!(verdicts[9].is_outlier);
        assert_eq!(verdicts[9].exceed_fraction, 1.0);
        for v in &verdicts[..9] {
            assert!(!v.is_outlier);
            assert!((v.exceed_fraction - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tight_trace_has_no_outliers() {
        let points: Vec<Observation> = (0..10)
            .map(|i| obs("a", i as f64, 121.5 + 1e-6 * i as f64, 31.2, 2.0))
            .collect();
        let trace = Trace::new("a", points);
        let verdicts = detect_outliers(&trace, &EARTH).unwrap();
        assert!(verdicts.iter().all(|v| !v.is_outlier));
    }

    #[test]
    fn verdicts_are_stable_under_relabeling_and_time_shift() {
        let mut points: Vec<Observation> = (0..9)
            .map(|i| obs("a", i as f64, 121.5, 31.2, 0.0))
            .collect();
        points.push(obs("a", 9.0, 121.501, 31.2, 0.0));
        let base = detect_outliers(&Trace::new("a", points.clone()), &EARTH).unwrap();

        let mut shifted = points.clone();
        for o in &mut shifted {
            o.device_id = "другое".into();
            o.time += 123_456.0;
        }
        let moved = detect_outliers(&Trace::new("другое", shifted), &EARTH).unwrap();
        assert_eq!(base, moved);
    }

    #[test]
    fn exceed_fractions_are_multiples_of_one_over_n_minus_one() {
        let mut points: Vec<Observation> = (0..7)
            .map(|i| obs("a", i as f64, 121.5 + 1e-5 * i as f64, 31.2, 0.5))
            .collect();
        points.push(obs("a", 7.0, 121.6, 31.2, 0.5));
        let trace = Trace::new("a", points);
        let n = trace.len();
        let verdicts = detect_outliers(&trace, &EARTH).unwrap();
        for v in verdicts {
            let scaled = v.exceed_fraction * (n - 1) as f64;
            assert!((scaled - scaled.round()).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&v.exceed_fraction));
        }
    }

    #[test]
    fn matrix_and_detection_agree() {
        let mut points: Vec<Observation> = (0..9)
            .map(|i| obs("a", i as f64, 121.5 + 2e-6 * i as f64, 31.2, 0.01))
            .collect();
        points.push(obs("a", 9.0, 121.55, 31.2, 0.01));
        let trace = Trace::new("a", points);
        let direct = detect_outliers(&trace, &EARTH).unwrap();
        let matrix = pairwise_distance_matrix(&trace, &EARTH).unwrap();
        let recomputed = verdicts_from_matrix(&matrix, trace.mean_speed, trace.duration);
        assert_eq!(direct, recomputed);
    }
}
