//! Geometric primitives: ellipsoidal distance, a local equal-area plane,
//! medioids, convex-hull scales and polygon containment.

mod hull;
mod polygon;
mod projection;
mod vincenty;

use serde::{Deserialize, Serialize};

pub use hull::{convex_hull, hull_scale, medioid, shoelace_area, HullPoints, HullScale};
pub use polygon::{point_in_polygon, Crs, Polygon, PolygonLayer};
pub use projection::{LocalProjection, MAX_PROJECTION_RANGE_M};
pub use vincenty::{vincenty_distance, WGS84_A, WGS84_F};

/// A WGS-84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// A position in meters on a projected plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanePoint { x, y }
    }

    pub fn distance(&self, other: &PlanePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}
