use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::PlanePoint;
use crate::error::{Error, Result};

/// Whether repeated locations count once or once per report when selecting
/// the nearest fraction of a subnet's points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullPoints {
    #[default]
    Duplicates,
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullScale {
    /// Square root of the hull area, in meters.
    pub scale_m: f64,
    pub area_m2: f64,
    /// Number of points kept by the nearest-fraction selection.
    pub selected: usize,
    /// Fewer than three distinct selected points, or all collinear.
    pub degenerate: bool,
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Component-wise median of x and y.
pub fn medioid(points: &[PlanePoint]) -> Result<PlanePoint> {
    if points.is_empty() {
        return Err(Error::Empty("medioid of an empty point set"));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    Ok(PlanePoint::new(median_of(&mut xs), median_of(&mut ys)))
}

fn lexicographic(a: &PlanePoint, b: &PlanePoint) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

fn cross(o: &PlanePoint, a: &PlanePoint, b: &PlanePoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by Andrew's monotone chain.
///
/// Vertices come back counter-clockwise starting from the lexicographically
/// smallest point; collinear boundary points are dropped. Fewer than three
/// vertices means the input was degenerate.
pub fn convex_hull(points: &[PlanePoint]) -> Vec<PlanePoint> {
    let mut pts = points.to_vec();
    pts.sort_by(lexicographic);
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<PlanePoint> = Vec::with_capacity(pts.len() + 1);
    for p in &pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon given as an open vertex ring.
///
/// Coordinates are taken relative to the first vertex so that the result
/// does not depend on where the polygon sits in the plane.
pub fn shoelace_area(ring: &[PlanePoint]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut twice = 0.0;
    for i in 1..ring.len() - 1 {
        let (a, b) = (ring[i], ring[i + 1]);
        twice += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    twice.abs() / 2.0
}

/// Length scale of the `fraction` of points nearest their medioid: the
/// square root of the area of their convex hull.
///
/// The selection keeps `ceil(fraction * n)` points ordered by
/// (distance to medioid, x, y, input position).
pub fn hull_scale(points: &[PlanePoint], fraction: f64, mode: HullPoints) -> Result<HullScale> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("hull fraction {fraction} outside (0, 1]")));
    }
    let owned;
    let points = match mode {
        HullPoints::Duplicates => points,
        HullPoints::Unique => {
            let mut v = points.to_vec();
            v.sort_by(lexicographic);
            v.dedup_by(|a, b| a.x == b.x && a.y == b.y);
            owned = v;
            &owned[..]
        }
    };
    let center = medioid(points)?;
    let n = points.len();
    let keep = selection_size(n, fraction);

    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p.x - center.x).powi(2) + (p.y - center.y).powi(2), i))
        .collect();
    order.sort_by(|(da, ia), (db, ib)| {
        da.total_cmp(db)
            .then_with(|| lexicographic(&points[*ia], &points[*ib]))
            .then(ia.cmp(ib))
    });
    let selected: Vec<PlanePoint> = order[..keep].iter().map(|&(_, i)| points[i]).collect();

    let hull = convex_hull(&selected);
    let area = if hull.len() >= 3 { shoelace_area(&hull) } else { 0.0 };
    Ok(HullScale {
        scale_m: area.sqrt(),
        area_m2: area,
        selected: keep,
        degenerate: hull.len() < 3 || area == 0.0,
    })
}

/// `ceil(fraction * n)`, with a small guard so that products such as
/// `0.9 * 10` that land a hair above an integer are not rounded up.
pub(crate) fn selection_size(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    let k = (raw - 1e-9).ceil().max(1.0) as usize;
    k.min(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Vec<PlanePoint> {
        vec![
            PlanePoint::new(0.0, 0.0),
            PlanePoint::new(1.0, 0.0),
            PlanePoint::new(1.0, 1.0),
            PlanePoint::new(0.0, 1.0),
        ]
    }

    #[test]
    fn medioid_basics() {
        let p = PlanePoint::new(3.0, -2.0);
        assert_eq!(medioid(&[p]).unwrap(), p);
        assert_eq!(medioid(&unit_square()).unwrap(), PlanePoint::new(0.5, 0.5));
        assert!(matches!(medioid(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn medioid_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<PlanePoint> = (0..7)
            .map(|_| PlanePoint::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
            .collect();
        let mut xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(medioid(&pts).unwrap(), PlanePoint::new(xs[3], ys[3]));
    }

    #[test]
    fn unit_square_scale_is_one() {
        let s = hull_scale(&unit_square(), 1.0, HullPoints::Duplicates).unwrap();
        assert_eq!(s.area_m2, 1.0);
        assert_eq!(s.scale_m, 1.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn collinear_and_identical_points_are_degenerate() {
        let line: Vec<PlanePoint> = (0..10).map(|i| PlanePoint::new(i as f64, 2.0 * i as f64)).collect();
        let s = hull_scale(&line, 1.0, HullPoints::Duplicates).unwrap();
        assert_eq!(s.scale_m, 0.0);
        assert!(s.degenerate);
        let same = vec![PlanePoint::new(5.0, 5.0); 20];
        let s = hull_scale(&same, 0.5, HullPoints::Unique).unwrap();
        assert!(s.degenerate && s.scale_m == 0.0);
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(hull_scale(&unit_square(), 0.0, HullPoints::Duplicates).is_err());
        assert!(hull_scale(&unit_square(), 1.5, HullPoints::Duplicates).is_err());
    }

    #[test]
    fn selection_size_guards_rounding() {
        assert_eq!(selection_size(10, 0.9), 9);
        assert_eq!(selection_size(4, 0.75), 3);
        assert_eq!(selection_size(7, 0.5), 4);
        assert_eq!(selection_size(3, 0.01), 1);
    }

    #[test]
    fn hull_drops_collinear_boundary_points() {
        let mut pts = unit_square();
        pts.push(PlanePoint::new(0.5, 0.0));
        pts.push(PlanePoint::new(0.5, 0.5));
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert_eq!(h[0], PlanePoint::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn scale_is_monotone_in_fraction(seed in any::<u64>(), n in 3usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<PlanePoint> = (0..n)
                .map(|_| PlanePoint::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)))
                .collect();
            let mut last = 0.0;
            for f in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
                let s = hull_scale(&pts, f, HullPoints::Duplicates).unwrap().scale_m;
                prop_assert!(s >= last);
                last = s;
            }
        }

        #[test]
        fn scale_is_translation_and_quarter_turn_invariant(
            seed in any::<u64>(), dx in -1e5f64..1e5, dy in -1e5f64..1e5, turns in 0u8..4
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<PlanePoint> = (0..40)
                .map(|_| PlanePoint::new(rng.gen_range(-5e3..5e3), rng.gen_range(-5e3..5e3)))
                .collect();
            let moved: Vec<PlanePoint> = pts
                .iter()
                .map(|p| {
                    let mut q = *p;
                    for _ in 0..turns {
                        q = PlanePoint::new(-q.y, q.x);
                    }
                    PlanePoint::new(q.x + dx, q.y + dy)
                })
                .collect();
            for f in [0.5, 0.75, 1.0] {
                let a = hull_scale(&pts, f, HullPoints::Duplicates).unwrap().scale_m;
                let b = hull_scale(&moved, f, HullPoints::Duplicates).unwrap().scale_m;
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
            }
        }

        // The coordinate-wise median only follows arbitrary rotations when
        // the cloud is centrally symmetric, so that is the case tested here.
        #[test]
        fn scale_is_rotation_invariant_for_symmetric_clouds(
            seed in any::<u64>(), dx in -1e5f64..1e5, dy in -1e5f64..1e5, theta in 0.0f64..6.28
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let half: Vec<PlanePoint> = (0..20)
                .map(|_| PlanePoint::new(rng.gen_range(-5e3..5e3), rng.gen_range(-5e3..5e3)))
                .collect();
            let pts: Vec<PlanePoint> = half
                .iter()
                .flat_map(|p| [*p, PlanePoint::new(-p.x, -p.y)])
                .collect();
            let (s, c) = theta.sin_cos();
            let moved: Vec<PlanePoint> = pts
                .iter()
                .map(|p| PlanePoint::new(c * p.x - s * p.y + dx, s * p.x + c * p.y + dy))
                .collect();
            for f in [0.5, 0.75, 1.0] {
                let a = hull_scale(&pts, f, HullPoints::Duplicates).unwrap().scale_m;
                let b = hull_scale(&moved, f, HullPoints::Duplicates).unwrap().scale_m;
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
            }
        }

        #[test]
        fn medioid_is_permutation_invariant(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<PlanePoint> = (0..n)
                .map(|_| PlanePoint::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
                .collect();
            let mut shuffled = pts.clone();
            shuffled.reverse();
            shuffled.rotate_left(n / 2);
            prop_assert_eq!(medioid(&pts).unwrap(), medioid(&shuffled).unwrap());
        }
    }
}
