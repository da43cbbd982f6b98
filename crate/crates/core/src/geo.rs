//! Great-circle distances and the boxplot-style radius quantiles used to
//! grow probe neighborhoods around a target probe.

use alloc::vec::Vec;
use thiserror::Error;

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    OutOfRange { lat: f64, lon: f64 },
    #[error("need at least 2 probes for distance quantiles")]
    TooFewProbes,
}

fn check(lat: f64, lon: f64) -> Result<(), GeoError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(GeoError::OutOfRange { lat, lon });
    }
    Ok(())
}

/// Haversine great-circle distance in kilometers between two (lat, lon)
/// pairs given in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> Result<f64, GeoError> {
    check(a.0, a.1)?;
    check(b.0, b.1)?;
    let to_rad = core::f64::consts::PI / 180.0;
    let (lat1, lon1) = (a.0 * to_rad, a.1 * to_rad);
    let (lat2, lon2) = (b.0 * to_rad, b.1 * to_rad);
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let s = libm::sin(dlat / 2.0) * libm::sin(dlat / 2.0)
        + libm::cos(lat1) * libm::cos(lat2) * libm::sin(dlon / 2.0) * libm::sin(dlon / 2.0);
    Ok(2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(s.min(1.0))))
}

/// Quartiles of a distance distribution plus the upper-whisker radius `w2`,
/// the largest distance not exceeding `1.5 (q3 - q1) + q3`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadiusQuantiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub w2: f64,
}

/// Linear-interpolation quantile of a sorted slice, `q` in `[0, 1]`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Computes [`RadiusQuantiles`] over a set of probe distances (km).
pub fn radius_quantiles(distances: &[f64]) -> Result<RadiusQuantiles, GeoError> {
    if distances.len() < 2 {
        return Err(GeoError::TooFewProbes);
    }
    let mut sorted: Vec<f64> = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let fence = 1.5 * (q3 - q1) + q3;
    let w2 = sorted
        .iter()
        .copied()
        .filter(|d| *d <= fence)
        .fold(0.0, f64::max);
    Ok(RadiusQuantiles { q1, median, q3, w2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_zero() {
        assert_eq!(haversine_km((45.0, 7.6), (45.0, 7.6)).unwrap(), 0.0);
    }

    #[test]
    fn antipodal_on_equator() {
        let d = haversine_km((0.0, 0.0), (0.0, 180.0)).unwrap();
        assert!((d - core::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-6);
    }

    #[test]
    fn torino_scale_distance() {
        // 0.1 degrees of latitude along a meridian; spherical-law oracle:
        // 0.1 * pi/180 * 6371.0 = 11.1194... km.
        let d = haversine_km((45.0, 7.6), (45.1, 7.6)).unwrap();
        assert!((d - 11.1194).abs() < 0.01, "got {d}");
    }

    #[test]
    fn symmetry() {
        let a = (45.07, 7.66);
        let b = (45.03, 7.63);
        assert_eq!(
            haversine_km(a, b).unwrap(),
            haversine_km(b, a).unwrap()
        );
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(haversine_km((91.0, 0.0), (0.0, 0.0)).is_err());
        assert!(haversine_km((0.0, 0.0), (0.0, 181.0)).is_err());
    }

    #[test]
    fn quantiles_linear_interpolation() {
        // distances {1,2,3,4}: q1=1.75, median=2.5, q3=3.25,
        // fence = 1.5*1.5+3.25 = 5.5 so w2=4.
        let q = radius_quantiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((q.q1 - 1.75).abs() < 1e-12);
        assert!((q.median - 2.5).abs() < 1e-12);
        assert!((q.q3 - 3.25).abs() < 1e-12);
        assert_eq!(q.w2, 4.0);
    }

    #[test]
    fn colocated_probes_all_zero() {
        let q = radius_quantiles(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q, RadiusQuantiles { q1: 0.0, median: 0.0, q3: 0.0, w2: 0.0 });
    }

    #[test]
    fn whisker_excludes_extreme_outlier() {
        let q = radius_quantiles(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(q.w2, 4.0);
    }

    #[test]
    fn single_probe_error() {
        assert_eq!(radius_quantiles(&[1.0]), Err(GeoError::TooFewProbes));
    }
}
