//! Spherical geometry: haversine great-circle distance, the auxiliary chord
//! distances, and the trace-diameter threshold `d_max = v * t`.

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const MEAN_EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub longitude: f64,
    pub latitude: f64,
}

impl GeoPoint {
    pub fn new(longitude: f64, latitude: f64) -> Result<Self> {
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::CoordinateOutOfRange {
                name: "longitude",
                value: longitude,
            });
        }
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::CoordinateOutOfRange {
                name: "latitude",
                value: latitude,
            });
        }
        Ok(GeoPoint {
            longitude,
            latitude,
        })
    }
}

/// Spherical Earth of configurable radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthModel {
    pub radius_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_m: MEAN_EARTH_RADIUS_M,
        }
    }
}

/// Great-circle distance in meters between `a` and `b`.
///
/// Symmetric, nonnegative and at most `pi * R`.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint, earth: &EarthModel) -> f64 {
    let lat_a = a.latitude.to_radians();
    let lat_b = b.latitude.to_radians();
    let dlat = (b.latitude - a.latitude).to_radians();
    let dlon = (b.longitude - a.longitude).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (dlon / 2.0).sin().powi(2);
    // rounding can push h a hair past 1 for antipodal points
    2.0 * earth.radius_m * h.sqrt().min(1.0).asin()
}

/// The two auxiliary chord distances `(d_AD, d_CB)`:
/// `d_AD = 2R sin(dlon/2) cos(lat_a)` and `d_CB = 2R sin(dlon/2) cos(lat_b)`.
///
/// Both are zero when the longitudes coincide and equal when the latitudes do.
pub fn chord_distances(a: GeoPoint, b: GeoPoint, earth: &EarthModel) -> (f64, f64) {
    let dlon = (b.longitude - a.longitude).to_radians();
    let s = (dlon / 2.0).sin().abs();
    let d_ad = 2.0 * earth.radius_m * s * a.latitude.to_radians().cos();
    let d_cb = 2.0 * earth.radius_m * s * b.latitude.to_radians().cos();
    (d_ad, d_cb)
}

/// Trace diameter threshold: mean speed times total duration.
pub fn diameter_threshold(mean_speed: f64, duration: f64) -> f64 {
    mean_speed * duration
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint::new(lon, lat).unwrap()
    }

    const EARTH: EarthModel = EarthModel {
        radius_m: MEAN_EARTH_RADIUS_M,
    };

    #[test]
    fn identical_points_have_zero_distance() {
        let a = p(121.5767, 31.2595);
        assert_eq!(haversine_distance(a, a, &EARTH), 0.0);
    }

    #[test]
    fn antipodal_equator_points_are_half_circumference() {
        let d = haversine_distance(p(0.0, 0.0), p(180.0, 0.0), &EARTH);
        let half_circumference = std::f64::consts::PI * MEAN_EARTH_RADIUS_M;
        assert!((d - half_circumference).abs() < 1.0, "d = {d}");
        assert!((half_circumference - 20_015_114.442).abs() < 0.01);
    }

    #[test]
    fn quarter_great_circle() {
        // oracle: (pi/2) * 6371008.8 evaluated independently
        let d = haversine_distance(p(0.0, 0.0), p(90.0, 0.0), &EARTH);
        assert!((d - 10_007_557.221_017_962).abs() < 1e-3, "d = {d}");
    }

    #[test]
    fn chords_vanish_with_zero_longitude_delta() {
        let (d_ad, d_cb) = chord_distances(p(10.0, 20.0), p(10.0, 50.0), &EARTH);
        assert_eq!(d_ad, 0.0);
        assert_eq!(d_cb, 0.0);
    }

    #[test]
    fn chords_on_equator_at_180_degrees() {
        let (d_ad, d_cb) = chord_distances(p(0.0, 0.0), p(180.0, 0.0), &EARTH);
        assert!((d_ad - 2.0 * MEAN_EARTH_RADIUS_M).abs() < 1e-6);
        assert!((d_cb - 2.0 * MEAN_EARTH_RADIUS_M).abs() < 1e-6);
    }

    #[test]
    fn chords_at_mixed_latitudes() {
        // oracle: 2R sin(45 deg) cos(60 deg) and 2R sin(45 deg) cos(0)
        let (d_ad, d_cb) = chord_distances(p(0.0, 60.0), p(90.0, 0.0), &EARTH);
        assert!((d_ad - 4_504_983.525_479_169).abs() < 1e-3, "d_ad = {d_ad}");
        assert!((d_cb - 9_009_967.050_958_337).abs() < 1e-3, "d_cb = {d_cb}");
    }

    #[test]
    fn diameter_threshold_is_a_product() {
        assert_eq!(diameter_threshold(0.0, 600.0), 0.0);
        assert_eq!(diameter_threshold(2.5, 600.0), 1500.0);
    }

    #[test]
    fn small_angle_matches_equirectangular() {
        // points ~700 m apart near Shanghai
        let a = p(121.5708, 31.2566);
        let b = p(121.5767, 31.2595);
        let d = haversine_distance(a, b, &EARTH);
        let mean_lat = ((a.latitude + b.latitude) / 2.0).to_radians();
        let dx = (b.longitude - a.longitude).to_radians() * mean_lat.cos();
        let dy = (b.latitude - a.latitude).to_radians();
        let approx = MEAN_EARTH_RADIUS_M * (dx * dx + dy * dy).sqrt();
        assert!(d < 1000.0);
        assert!((d - approx).abs() / d < 1e-3, "d = {d}, approx = {approx}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_point() -> impl Strategy<Value = GeoPoint> {
            (-180.0f64..180.0, -90.0f64..90.0).prop_map(|(lon, lat)| p(lon, lat))
        }

        proptest! {
            #[test]
            fn symmetry_is_exact(a in arb_point(), b in arb_point()) {
                prop_assert_eq!(
                    haversine_distance(a, b, &EARTH),
                    haversine_distance(b, a, &EARTH)
                );
            }

            #[test]
            fn bounded_by_half_circumference(a in arb_point(), b in arb_point(), c in arb_point()) {
                let limit = std::f64::consts::PI * EARTH.radius_m + 1e-6;
                for (x, y) in [(a, b), (a, c), (b, c)] {
                    let d = haversine_distance(x, y, &EARTH);
                    prop_assert!((0.0..=limit).contains(&d));
                }
            }
        }
    }
}
