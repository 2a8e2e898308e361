use std::f64::consts::PI;

use super::GeoPoint;
use crate::error::{Error, Result};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

const MAX_ITERATIONS: usize = 200;
const CONVERGENCE_RAD: f64 = 1e-12;

/// Inverse geodesic distance in meters on the WGS-84 ellipsoid.
///
/// Returns [`Error::Antipodal`] when the longitude iteration fails to
/// converge, which happens only for nearly antipodal pairs.
pub fn vincenty_distance(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    let f = WGS84_F;
    let l = (b.lon - a.lon).to_radians();
    let u1 = ((1.0 - f) * a.lat.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * b.lat.to_radians().tan()).atan();
    let (sin_u1, cos_u1) = u1.sin_cos();
    let (sin_u2, cos_u2) = u2.sin_cos();

    let mut lambda = l;
    let mut iterations = 0;
    let (sigma, sin_sigma, cos_sigma, cos_sq_alpha, cos_2sigma_m) = loop {
        let (sin_lambda, cos_lambda) = lambda.sin_cos();
        let sin_sigma = ((cos_u2 * sin_lambda).powi(2)
            + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda).powi(2))
        .sqrt();
        if sin_sigma == 0.0 {
            // coincident points (including the same pole at different longitudes)
            return Ok(0.0);
        }
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lambda;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cos_u1 * cos_u2 * sin_lambda / sin_sigma;
        let cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
        // equatorial line: cos_sq_alpha = 0
        let cos_2sigma_m = if cos_sq_alpha != 0.0 {
            cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        } else {
            0.0
        };
        let c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
        let previous = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma
                    + c * sin_sigma
                        * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))));
        iterations += 1;
        if lambda.abs() > PI || iterations > MAX_ITERATIONS {
            return Err(Error::Antipodal);
        }
        if (lambda - previous).abs() < CONVERGENCE_RAD {
            break (sigma, sin_sigma, cos_sigma, cos_sq_alpha, cos_2sigma_m);
        }
    };

    let u_sq = cos_sq_alpha * (WGS84_A * WGS84_A - WGS84_B * WGS84_B) / (WGS84_B * WGS84_B);
    let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
    let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
    let delta_sigma = big_b
        * sin_sigma
        * (cos_2sigma_m
            + big_b / 4.0
                * (cos_sigma * (-1.0 + 2.0 * cos_2sigma_m.powi(2))
                    - big_b / 6.0
                        * cos_2sigma_m
                        * (-3.0 + 4.0 * sin_sigma.powi(2))
                        * (-3.0 + 4.0 * cos_2sigma_m.powi(2))));
    Ok(WGS84_B * big_a * (sigma - delta_sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use geographiclib_rs::{Geodesic, InverseGeodesic};

    fn karney(a: GeoPoint, b: GeoPoint) -> f64 {
        let g = Geodesic::wgs84();
        let s12: f64 = g.inverse(a.lat, a.lon, b.lat, b.lon);
        s12
    }

    #[test]
    fn identity_is_zero() {
        let p = GeoPoint::new(41.8781, -87.6298);
        assert_eq!(vincenty_distance(p, p).unwrap(), 0.0);
    }

    #[test]
    fn chicago_to_new_york_matches_karney() {
        let chi = GeoPoint::new(41.8781, -87.6298);
        let nyc = GeoPoint::new(40.7128, -74.0060);
        let d = vincenty_distance(chi, nyc).unwrap();
        assert!((d - karney(chi, nyc)).abs() < 1e-3, "{d}");
        // frozen from the Karney solution
        assert!((d - 1_147_191.04).abs() < 0.01, "{d}");
    }

    #[test]
    fn near_antipodal_equator_errors_or_matches() {
        let a = GeoPoint::new(0.0, 0.0);
        let b = GeoPoint::new(0.0, 179.9999);
        match vincenty_distance(a, b) {
            Err(Error::Antipodal) => {}
            Ok(d) => assert!((d - karney(a, b)).abs() < 1e-3),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn poles_and_meridians() {
        let np1 = GeoPoint::new(90.0, 0.0);
        let np2 = GeoPoint::new(90.0, 45.0);
        assert!(vincenty_distance(np1, np2).unwrap() < 1e-6);
        let a = GeoPoint::new(-10.0, 20.0);
        let b = GeoPoint::new(35.0, 20.0);
        let d = vincenty_distance(a, b).unwrap();
        assert!((d - karney(a, b)).abs() < 1e-3);
    }
}
