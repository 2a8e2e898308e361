//! Polygon layers (census tracts and similar) and point containment.
//!
//! Text format, one polygon per non-comment line, fields separated by `|`:
//!
//! ```text
//! #crs=geo
//! tract_01 | density=1200;log_mhi=10.9 | -87.70 41.80, -87.60 41.80, -87.60 41.90, -87.70 41.80
//! ```
//!
//! The third and later fields are rings given as `x y` pairs separated by
//! commas; for `crs=geo` layers `x` is longitude and `y` latitude. Rings must
//! be closed and simple. Extra rings act as holes under the even-odd rule.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeoPoint, PlanePoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crs {
    /// x = longitude, y = latitude, in degrees.
    Geo,
    /// x, y in meters.
    Plane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub rings: Vec<Vec<PlanePoint>>,
    bbox: [f64; 4],
}

impl Polygon {
    pub fn new(
        id: impl Into<String>,
        attributes: BTreeMap<String, String>,
        rings: Vec<Vec<PlanePoint>>,
    ) -> Result<Self> {
        let id = id.into();
        if rings.is_empty() {
            return Err(Error::Polygon { id, detail: "no rings".into() });
        }
        for ring in &rings {
            validate_ring(&id, ring)?;
        }
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in rings.iter().flatten() {
            bbox[0] = bbox[0].min(p.x);
            bbox[1] = bbox[1].min(p.y);
            bbox[2] = bbox[2].max(p.x);
            bbox[3] = bbox[3].max(p.y);
        }
        Ok(Polygon { id, attributes, rings, bbox })
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    pub fn numeric_attribute(&self, key: &str) -> Option<f64> {
        self.attribute(key)?.trim().parse().ok().filter(|v: &f64| v.is_finite())
    }

    /// Even-odd containment; points on any edge count as inside.
    pub fn contains(&self, p: PlanePoint) -> bool {
        if p.x < self.bbox[0] || p.x > self.bbox[2] || p.y < self.bbox[1] || p.y > self.bbox[3] {
            return false;
        }
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if on_segment(a, b, p) {
                    return true;
                }
                if (a.y > p.y) != (b.y > p.y) {
                    let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if p.x < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Rough centroid of the outer ring's vertices, used by generators and tests.
    pub fn vertex_mean(&self) -> PlanePoint {
        let ring = &self.rings[0];
        let n = (ring.len() - 1) as f64;
        let (sx, sy) = ring[..ring.len() - 1]
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        PlanePoint::new(sx / n, sy / n)
    }
}

fn on_segment(a: PlanePoint, b: PlanePoint, p: PlanePoint) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    cross == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn orientation(a: PlanePoint, b: PlanePoint, c: PlanePoint) -> i8 {
    let v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn segments_intersect(p1: PlanePoint, p2: PlanePoint, q1: PlanePoint, q2: PlanePoint) -> bool {
    let (o1, o2) = (orientation(p1, p2, q1), orientation(p1, p2, q2));
    let (o3, o4) = (orientation(q1, q2, p1), orientation(q1, q2, p2));
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_segment(p1, p2, q1))
        || (o2 == 0 && on_segment(p1, p2, q2))
        || (o3 == 0 && on_segment(q1, q2, p1))
        || (o4 == 0 && on_segment(q1, q2, p2))
}

fn validate_ring(id: &str, ring: &[PlanePoint]) -> Result<()> {
    let err = |detail: String| Error::Polygon { id: id.to_string(), detail };
    if ring.len() < 4 {
        return Err(err(format!("ring has {} points, need at least 4 (closed)", ring.len())));
    }
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(err("non-finite coordinate".into()));
    }
    if ring[0] != ring[ring.len() - 1] {
        return Err(err("ring is not closed".into()));
    }
    let edges = ring.len() - 1;
    for i in 0..edges {
        if ring[i] == ring[i + 1] {
            return Err(err(format!("repeated vertex at position {i}")));
        }
        for j in i + 1..edges {
            let adjacent = j == i + 1 || (i == 0 && j == edges - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Err(err(format!("edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

/// A set of polygons sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonLayer {
    pub crs: Crs,
    polygons: Vec<Polygon>,
}

impl PolygonLayer {
    pub fn new(crs: Crs, mut polygons: Vec<Polygon>) -> Result<Self> {
        polygons.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = polygons.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Polygon { id: w[0].id.clone(), detail: "duplicate polygon id".into() });
        }
        Ok(PolygonLayer { crs, polygons })
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn get(&self, id: &str) -> Option<&Polygon> {
        self.polygons
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.polygons[i])
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    /// Layer coordinates for a geographic point; only meaningful for geo layers.
    pub fn geo_key(p: GeoPoint) -> PlanePoint {
        PlanePoint::new(p.lon, p.lat)
    }

    pub fn locate_geo(&self, p: GeoPoint) -> Option<&Polygon> {
        point_in_polygon(Self::geo_key(p), self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut crs = Crs::Plane;
        let mut polygons = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("crs=") {
                    crs = match v.trim() {
                        "geo" => Crs::Geo,
                        "plane" => Crs::Plane,
                        other => return Err(Error::Data(format!("unknown crs {other:?}"))),
                    };
                }
                continue;
            }
            let bad = |detail: &str| Error::Data(format!("polygon line {}: {detail}", lineno + 1));
            let mut fields = line.split('|').map(str::trim);
            let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(|| bad("missing id"))?;
            let attr_field = fields.next().ok_or_else(|| bad("missing attribute field"))?;
            let mut attributes = BTreeMap::new();
            for kv in attr_field.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("attribute without '='"))?;
                attributes.insert(k.trim().to_string(), v.trim().to_string());
            }
            let mut rings = Vec::new();
            for ring_text in fields {
                let mut ring = Vec::new();
                for pair in ring_text.split(',') {
                    let mut it = pair.split_whitespace();
                    let (x, y) = match (it.next(), it.next(), it.next()) {
                        (Some(x), Some(y), None) => (x, y),
                        _ => return Err(bad("ring coordinates must be 'x y' pairs")),
                    };
                    let x: f64 = x.parse().map_err(|_| bad("bad x coordinate"))?;
                    let y: f64 = y.parse().map_err(|_| bad("bad y coordinate"))?;
                    ring.push(PlanePoint::new(x, y));
                }
                rings.push(ring);
            }
            polygons.push(Polygon::new(id, attributes, rings)?);
        }
        PolygonLayer::new(crs, polygons)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let crs = match self.crs {
            Crs::Geo => "geo",
            Crs::Plane => "plane",
        };
        let _ = writeln!(out, "#crs={crs}");
        for p in &self.polygons {
            let attrs: Vec<String> = p.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = write!(out, "{} | {}", p.id, attrs.join(";"));
            for ring in &p.rings {
                let coords: Vec<String> = ring.iter().map(|q| format!("{:.6} {:.6}", q.x, q.y)).collect();
                let _ = write!(out, " | {}", coords.join(", "));
            }
            out.push('\n');
        }
        out
    }
}

/// The polygon containing `p`, by even-odd rule. Points on shared boundaries
/// go to the polygon whose id sorts first.
pub fn point_in_polygon(p: PlanePoint, layer: &PolygonLayer) -> Option<&Polygon> {
    layer.polygons.iter().find(|poly| poly.contains(p))
}
