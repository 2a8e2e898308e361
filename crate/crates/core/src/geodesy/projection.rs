//! Oblique Lambert azimuthal equal-area projection on the WGS-84 ellipsoid.
//!
//! Each study region gets its own projection centered on the region center.
//! Areas are preserved exactly and the scale is true in every direction at
//! the origin, so convex-hull areas and medioid distances within a metro
//! region carry negligible distortion.

use super::vincenty::{WGS84_A, WGS84_F};
use super::{GeoPoint, PlanePoint};
use crate::error::{Error, Result};

/// Points farther than this from the origin are rejected.
pub const MAX_PROJECTION_RANGE_M: f64 = 500_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProjection {
    origin: GeoPoint,
    e: f64,
    e2: f64,
    qp: f64,
    rq: f64,
    d: f64,
    sin_beta1: f64,
    cos_beta1: f64,
    lon0: f64,
}

fn authalic_q(e: f64, e2: f64, sin_phi: f64) -> f64 {
    (1.0 - e2)
        * (sin_phi / (1.0 - e2 * sin_phi * sin_phi)
            - (1.0 / (2.0 * e)) * ((1.0 - e * sin_phi) / (1.0 + e * sin_phi)).ln())
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Result<Self> {
        if !origin.is_valid() || origin.lat.abs() > 89.0 {
            return Err(Error::Config(format!(
                "projection origin ({}, {}) is invalid or too close to a pole",
                origin.lat, origin.lon
            )));
        }
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let e = e2.sqrt();
        let qp = authalic_q(e, e2, 1.0);
        let rq = WGS84_A * (qp / 2.0).sqrt();
        let phi1 = origin.lat.to_radians();
        let (sin_phi1, cos_phi1) = phi1.sin_cos();
        let beta1 = (authalic_q(e, e2, sin_phi1) / qp).asin();
        let (sin_beta1, cos_beta1) = beta1.sin_cos();
        let m1 = cos_phi1 / (1.0 - e2 * sin_phi1 * sin_phi1).sqrt();
        let d = WGS84_A * m1 / (rq * cos_beta1);
        Ok(LocalProjection {
            origin,
            e,
            e2,
            qp,
            rq,
            d,
            sin_beta1,
            cos_beta1,
            lon0: origin.lon.to_radians(),
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn project(&self, p: GeoPoint) -> Result<PlanePoint> {
        let (sin_phi, _) = p.lat.to_radians().sin_cos();
        let q = authalic_q(self.e, self.e2, sin_phi);
        let beta = (q / self.qp).clamp(-1.0, 1.0).asin();
        let (sin_beta, cos_beta) = beta.sin_cos();
        let (sin_dl, cos_dl) = (p.lon.to_radians() - self.lon0).sin_cos();
        let denom = 1.0 + self.sin_beta1 * sin_beta + self.cos_beta1 * cos_beta * cos_dl;
        if denom <= 1e-12 {
            return Err(self.out_of_range(f64::INFINITY));
        }
        let b = self.rq * (2.0 / denom).sqrt();
        let x = b * self.d * cos_beta * sin_dl;
        let y = (b / self.d) * (self.cos_beta1 * sin_beta - self.sin_beta1 * cos_beta * cos_dl);
        let out = PlanePoint::new(x, y);
        let rho = self.rho(out);
        if rho > MAX_PROJECTION_RANGE_M {
            return Err(self.out_of_range(rho));
        }
        Ok(out)
    }

    pub fn unproject(&self, p: PlanePoint) -> Result<GeoPoint> {
        let rho = self.rho(p);
        if !rho.is_finite() || rho > MAX_PROJECTION_RANGE_M {
            return Err(self.out_of_range(rho));
        }
        if rho == 0.0 {
            return Ok(self.origin);
        }
        let ce = 2.0 * (rho / (2.0 * self.rq)).asin();
        let (sin_ce, cos_ce) = ce.sin_cos();
        let sin_beta = (cos_ce * self.sin_beta1 + self.d * p.y * sin_ce * self.cos_beta1 / rho)
            .clamp(-1.0, 1.0);
        let lon = self.lon0
            + (p.x * sin_ce).atan2(
                self.d * rho * self.cos_beta1 * cos_ce
                    - self.d * self.d * p.y * self.sin_beta1 * sin_ce,
            );
        let lat = self.latitude_from_q(self.qp * sin_beta);
        let mut lon_deg = lon.to_degrees();
        if lon_deg > 180.0 {
            lon_deg -= 360.0;
        } else if lon_deg < -180.0 {
            lon_deg += 360.0;
        }
        Ok(GeoPoint::new(lat.to_degrees(), lon_deg))
    }

    fn rho(&self, p: PlanePoint) -> f64 {
        (p.x / self.d).hypot(self.d * p.y)
    }

    // Newton iteration on the authalic latitude relation.
    fn latitude_from_q(&self, q: f64) -> f64 {
        let (e, e2) = (self.e, self.e2);
        let mut phi = (q / 2.0).clamp(-1.0, 1.0).asin();
        for _ in 0..20 {
            let (sin_phi, cos_phi) = phi.sin_cos();
            if cos_phi.abs() < 1e-12 {
                break;
            }
            let w = 1.0 - e2 * sin_phi * sin_phi;
            let step = w * w / (2.0 * cos_phi)
                * (q / (1.0 - e2) - sin_phi / w
                    + (1.0 / (2.0 * e)) * ((1.0 - e * sin_phi) / (1.0 + e * sin_phi)).ln());
            phi += step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        phi
    }

    fn out_of_range(&self, distance_m: f64) -> Error {
        Error::OutOfProjectionRange {
            distance_m,
            limit_m: MAX_PROJECTION_RANGE_M,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::vincenty_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CHICAGO: GeoPoint = GeoPoint::new(41.8781, -87.6298);

    #[test]
    fn origin_maps_to_zero() {
        let proj = LocalProjection::new(CHICAGO).unwrap();
        let p = proj.project(CHICAGO).unwrap();
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_a_tenth_of_a_meter() {
        let proj = LocalProjection::new(CHICAGO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let p = GeoPoint::new(
                CHICAGO.lat + rng.gen_range(-3.0..3.0),
                CHICAGO.lon + rng.gen_range(-4.0..4.0),
            );
            let back = proj.unproject(proj.project(p).unwrap()).unwrap();
            assert!(vincenty_distance(p, back).unwrap() < 0.1);
        }
    }

    #[test]
    fn short_distances_are_preserved_near_origin() {
        // Oracle: vincenty distance between two points 1000 m apart by
        // construction versus the planar distance between their images.
        let proj = LocalProjection::new(CHICAGO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let base = PlanePoint::new(rng.gen_range(-20e3..20e3), rng.gen_range(-20e3..20e3));
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = proj.unproject(base).unwrap();
            let b = proj
                .unproject(PlanePoint::new(base.x + 1000.0 * theta.cos(), base.y + 1000.0 * theta.sin()))
                .unwrap();
            let geodesic = vincenty_distance(a, b).unwrap();
            let planar = proj.project(a).unwrap().distance(&proj.project(b).unwrap());
            assert!((planar - geodesic).abs() / geodesic < 1e-3, "{planar} vs {geodesic}");
        }
    }

    #[test]
    fn equal_area_on_small_cells() {
        // A 0.01 x 0.01 degree cell on the ellipsoid has area
        // a^2 * dlon * (q(phi2) - q(phi1)) / 2 in closed form.
        let proj = LocalProjection::new(CHICAGO).unwrap();
        let (lat1, lat2, lon1, lon2): (f64, f64, f64, f64) = (42.10, 42.11, -87.90, -87.89);
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let e = e2.sqrt();
        let q = |lat: f64| authalic_q(e, e2, lat.to_radians().sin());
        let exact = WGS84_A * WGS84_A * (lon2 - lon1).to_radians() * (q(lat2) - q(lat1)) / 2.0;
        let corners = [(lat1, lon1), (lat1, lon2), (lat2, lon2), (lat2, lon1)]
            .map(|(la, lo)| proj.project(GeoPoint::new(la, lo)).unwrap());
        let planar = crate::geodesy::shoelace_area(&corners);
        // edges are straight in the plane but curved on the ellipsoid; the
        // chord error over a 1 km cell is far below this bound
        assert!((planar - exact).abs() / exact < 1e-5, "{planar} vs {exact}");
    }

    #[test]
    fn far_points_are_rejected() {
        let proj = LocalProjection::new(CHICAGO).unwrap();
        assert!(matches!(
            proj.project(GeoPoint::new(40.7128, -74.0060)),
            Err(Error::OutOfProjectionRange { .. })
        ));
        assert!(proj.unproject(PlanePoint::new(600e3, 0.0)).is_err());
    }
}
