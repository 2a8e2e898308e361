//! Distance between each cluster's GPS fix and each database's prediction.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::GeoDbSnapshot;
use crate::error::{Error, Result};
use crate::geodesy::{vincenty_distance, GeoPoint};
use crate::model::LocationCluster;

pub const DEFAULT_TOO_CLOSE_M: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    /// Index into the scored cluster slice.
    pub cluster: usize,
    pub provider: Arc<str>,
    pub predicted: GeoPoint,
    pub error_m: f64,
    pub claimed_accuracy_km: Option<f64>,
    pub too_close: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOutput {
    pub records: Vec<ErrorRecord>,
    pub misses: u64,
    /// Pairs where the geodesic solver did not converge; skipped.
    pub antipodal: u64,
}

enum Outcome {
    Hit(ErrorRecord),
    Miss,
    Antipodal,
}

/// Scores every cluster against one snapshot. Output order follows cluster
/// order regardless of thread count.
pub fn score_errors(
    clusters: &[LocationCluster],
    snapshot: &GeoDbSnapshot,
    too_close_m: f64,
) -> Result<ScoreOutput> {
    if let Some(c) = clusters.iter().find(|c| !snapshot.window.covers(c.t_start)) {
        return Err(Error::Config(format!(
            "cluster dated {} is outside the {} snapshot window {}..{}",
            c.t_start.date_naive(),
            snapshot.provider,
            snapshot.window.from,
            snapshot.window.to
        )));
    }
    let outcomes: Vec<Outcome> = clusters
        .par_iter()
        .enumerate()
        .map(|(i, c)| match snapshot.table.lookup(c.ip.addr) {
            None => Outcome::Miss,
            Some((_, entry)) => match vincenty_distance(c.position, entry.point) {
                Ok(d) => Outcome::Hit(ErrorRecord {
                    cluster: i,
                    provider: snapshot.provider.clone(),
                    predicted: entry.point,
                    error_m: d,
                    claimed_accuracy_km: entry.accuracy_km,
                    too_close: d < too_close_m,
                }),
                Err(_) => Outcome::Antipodal,
            },
        })
        .collect();
    let mut out = ScoreOutput::default();
    for o in outcomes {
        match o {
            Outcome::Hit(r) => out.records.push(r),
            Outcome::Miss => out.misses += 1,
            Outcome::Antipodal => out.antipodal += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrichment::{DbEntry, SnapshotWindow};
    use crate::model::{ClusterClass, ClusterIp};
    use rand::{Rng, SeedableRng};

    fn cluster(ip: &str, p: GeoPoint) -> LocationCluster {
        LocationCluster {
            device_id: "d".into(),
            t_start: "2019-03-05T01:00:00Z".parse().unwrap(),
            t_end: "2019-03-05T02:00:00Z".parse().unwrap(),
            position: p,
            accuracy_m: 10.0,
            coord_decimals: 6,
            class: ClusterClass::AreaDwell,
            ip: ClusterIp::full(ip.parse().unwrap()),
            bump_count: 1,
        }
    }

    fn window() -> SnapshotWindow {
        SnapshotWindow::new("2019-03-01".parse().unwrap(), "2019-03-31".parse().unwrap()).unwrap()
    }

    #[test]
    fn exact_hit_and_miss() {
        let p = GeoPoint::new(41.88, -87.63);
        let db = GeoDbSnapshot::new(
            "mmfree",
            "2019-03-01".parse().unwrap(),
            window(),
            [("10.0.0.0/8".parse().unwrap(), DbEntry { point: p, accuracy_km: Some(10.0) })],
        )
        .unwrap();
        let out = score_errors(&[cluster("10.1.1.1", p), cluster("11.1.1.1", p)], &db, 25.0).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.misses, 1);
        assert_eq!(out.records[0].error_m, 0.0);
        assert!(out.records[0].too_close);
    }

    #[test]
    fn window_mismatch_is_fatal() {
        let db = GeoDbSnapshot::new(
            "p",
            "2019-04-01".parse().unwrap(),
            SnapshotWindow::new("2019-04-01".parse().unwrap(), "2019-04-30".parse().unwrap()).unwrap(),
            [],
        )
        .unwrap();
        let err = score_errors(&[cluster("10.1.1.1", GeoPoint::new(0.0, 0.0))], &db, 25.0).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn random_pairs_match_direct_distance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut entries = Vec::new();
        let mut clusters = Vec::new();
        for i in 0..200u32 {
            let ip = std::net::Ipv4Addr::from(0x0a00_0000 | (i << 8));
            let pred = GeoPoint::new(rng.gen_range(25.0..49.0), rng.gen_range(-124.0..-67.0));
            entries.push((format!("{ip}/24").parse().unwrap(), DbEntry { point: pred, accuracy_km: None }));
            let gps = GeoPoint::new(rng.gen_range(25.0..49.0), rng.gen_range(-124.0..-67.0));
            clusters.push(cluster(&std::net::Ipv4Addr::from(u32::from(ip) | 7).to_string(), gps));
        }
        let db = GeoDbSnapshot::new("p", "2019-03-01".parse().unwrap(), window(), entries.clone()).unwrap();
        let out = score_errors(&clusters, &db, 25.0).unwrap();
        assert_eq!(out.records.len(), clusters.len());
        let geod = geographiclib_rs::Geodesic::wgs84();
        for r in &out.records {
            let (a, b) = (clusters[r.cluster].position, entries[r.cluster].1.point);
            let s12: f64 = geographiclib_rs::InverseGeodesic::inverse(&geod, a.lat, a.lon, b.lat, b.lon);
            assert!((r.error_m - s12).abs() < 1e-3, "{} vs {}", r.error_m, s12);
        }
    }
}
