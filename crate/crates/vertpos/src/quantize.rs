//! Altitude <-> class mapping that turns the regression target into a
//! K-way classification problem.
//!
//! Class `k` covers the interval `(h_min + (k-1)*delta, h_min + k*delta]`,
//! with `h_min` itself belonging to class 1, and is reported back as the
//! interval midpoint `(k - 1/2)*delta + h_min`.

use crate::data::format_f64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationScheme {
    pub h_min: f64,
    pub h_max: f64,
    pub delta: f64,
    pub num_classes: usize,
}

impl QuantizationScheme {
    /// Build a scheme over `[h_min, h_max]` with step `delta`.
    ///
    /// The class count is `ceil((h_max - h_min) / delta)`, so the classes
    /// tile `(h_min, h_max]` exactly; schemes with fewer than two classes
    /// are rejected.
    pub fn new(h_min: f64, h_max: f64, delta: f64) -> Result<Self> {
        if !h_min.is_finite() || !h_max.is_finite() || h_min >= h_max {
            return Err(Error::InvalidConfig(format!(
                "need h_min < h_max, got [{h_min}, {h_max}]"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "quantization step must be positive, got {delta}"
            )));
        }
        let num_classes = ((h_max - h_min) / delta).ceil() as usize;
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "altitude span {} with step {delta} yields {num_classes} class(es); need at least 2",
                h_max - h_min
            )));
        }
        Ok(QuantizationScheme {
            h_min,
            h_max,
            delta,
            num_classes,
        })
    }

    /// Scheme spanning the min/max of `altitudes` (training split only).
    pub fn from_altitudes(altitudes: &[f64], delta: f64) -> Result<Self> {
        if altitudes.is_empty() {
            return Err(Error::EmptySequence);
        }
        let h_min = altitudes.iter().cloned().fold(f64::INFINITY, f64::min);
        let h_max = altitudes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::new(h_min, h_max, delta)
    }

    /// Class index of altitude `h`: `ceil((h - h_min) / delta)`, with
    /// `h = h_min` clamped to class 1. Result is 1-based in `[1, K]`.
    pub fn class_of(&self, h: f64) -> Result<usize> {
        if !h.is_finite() || h < self.h_min || h > self.h_max {
            return Err(Error::AltitudeOutOfRange {
                altitude: h,
                h_min: self.h_min,
                h_max: self.h_max,
            });
        }
        let k = ((h - self.h_min) / self.delta).ceil() as usize;
        Ok(k.clamp(1, self.num_classes))
    }

    /// Altitude reported for class `k`: the interval midpoint
    /// `(k - 1/2) * delta + h_min`.
    pub fn predicted_altitude(&self, k: usize) -> Result<f64> {
        if k < 1 || k > self.num_classes {
            return Err(Error::ClassOutOfRange {
                class: k,
                num_classes: self.num_classes,
            });
        }
        Ok((k as f64 - 0.5) * self.delta + self.h_min)
    }

    /// One-line text form used inside model files.
    pub fn to_text(&self) -> String {
        format!(
            "scheme {} {} {}",
            format_f64(self.h_min),
            format_f64(self.h_max),
            format_f64(self.delta)
        )
    }

    pub fn from_text(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "scheme" {
            return Err(Error::BadModelFile(format!("bad scheme line: '{line}'")));
        }
        let mut nums = [0.0f64; 3];
        for (slot, raw) in nums.iter_mut().zip(&parts[1..]) {
            *slot = raw
                .parse()
                .map_err(|_| Error::BadModelFile(format!("bad scheme number '{raw}'")))?;
        }
        Self::new(nums[0], nums[1], nums[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> QuantizationScheme {
        QuantizationScheme::new(0.0, 80.0, 4.0).unwrap()
    }

    #[test]
    fn class_count_tiles_the_span() {
        assert_eq!(scheme().num_classes, 20);
        assert_eq!(QuantizationScheme::new(0.0, 78.2, 4.0).unwrap().num_classes, 20);
    }

    #[test]
    fn lower_boundary_maps_to_class_one() {
        assert_eq!(scheme().class_of(0.0).unwrap(), 1);
    }

    #[test]
    fn interior_point_uses_ceiling() {
        // ceil(10 / 4) = 3
        assert_eq!(scheme().class_of(10.0).unwrap(), 3);
    }

    #[test]
    fn interval_right_edge_belongs_to_the_class() {
        // class 1 covers (0, 4]
        assert_eq!(scheme().class_of(4.0).unwrap(), 1);
        assert_eq!(scheme().class_of(4.0 + 1e-9).unwrap(), 2);
    }

    #[test]
    fn centers_match_the_interval_midpoints() {
        let s = scheme();
        assert_eq!(s.predicted_altitude(1).unwrap(), 2.0);
        assert_eq!(s.predicted_altitude(3).unwrap(), 10.0);
        let k = s.num_classes;
        assert_eq!(
            s.predicted_altitude(k).unwrap(),
            (k as f64 - 0.5) * 4.0
        );
    }

    #[test]
    fn out_of_range_inputs_are_errors() {
        let s = scheme();
        assert!(matches!(
            s.class_of(-0.1),
            Err(Error::AltitudeOutOfRange { .. })
        ));
        assert!(matches!(
            s.class_of(80.1),
            Err(Error::AltitudeOutOfRange { .. })
        ));
        assert!(matches!(
            s.predicted_altitude(0),
            Err(Error::ClassOutOfRange { .. })
        ));
        assert!(matches!(
            s.predicted_altitude(21),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn round_trip_error_is_at_most_half_delta() {
        let s = scheme();
        let n = 10_000;
        for i in 1..=n {
            let h = s.h_min + (s.h_max - s.h_min) * i as f64 / n as f64;
            let k = s.class_of(h).unwrap();
            let center = s.predicted_altitude(k).unwrap();
            assert!(
                (center - h).abs() <= s.delta / 2.0 + 1e-12,
                "h = {h}, center = {center}"
            );
        }
    }

    #[test]
    fn class_of_is_monotone_and_covers_every_class() {
        let s = scheme();
        let mut seen = vec![false; s.num_classes];
        let mut last = 0usize;
        let n = 50_000;
        for i in 0..=n {
            let h = s.h_min + (s.h_max - s.h_min) * i as f64 / n as f64;
            let k = s.class_of(h).unwrap();
            assert!(k >= last, "class_of not monotone at h = {h}");
            last = k;
            seen[k - 1] = true;
        }
        assert!(seen.iter().all(|&s| s), "classes not all covered: {seen:?}");
    }

    #[test]
    fn text_round_trip() {
        let s = QuantizationScheme::new(0.0534, 78.1991, 4.0).unwrap();
        let back = QuantizationScheme::from_text(&s.to_text()).unwrap();
        assert_eq!(s, back);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_altitude(a in 0.0f64..80.0, b in 0.0f64..80.0) {
                let s = scheme();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(s.class_of(lo).unwrap() <= s.class_of(hi).unwrap());
            }
        }
    }
}
