//! Per-subnet geography: point sets, medioids, hull scales, and mean
//! geolocation error.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{pearson, Correlation};
use super::visits::{visit_histogram, VisitHistogram};
use crate::enrichment::ErrorRecord;
use crate::error::Result;
use crate::geodesy::{
    hull_scale, medioid, vincenty_distance, GeoPoint, HullPoints, HullScale, LocalProjection,
    PlanePoint, MAX_PROJECTION_RANGE_M,
};
use crate::model::{subnet_key, CityRegion, LocationCluster, SubnetKey};

fn default_fractions() -> Vec<f64> {
    vec![0.5, 0.75, 0.9, 1.0]
}
fn default_min() -> usize {
    10
}
fn default_cap() -> f64 {
    100_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_min")]
    pub min_devices: usize,
    #[serde(default = "default_min")]
    pub min_addresses: usize,
    /// Errors above this are discarded before averaging.
    #[serde(default = "default_cap")]
    pub error_cap_m: f64,
    #[serde(default)]
    pub hull_points: HullPoints,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            fractions: default_fractions(),
            min_devices: default_min(),
            min_addresses: default_min(),
            error_cap_m: default_cap(),
            hull_points: HullPoints::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanError {
    pub mean_m: f64,
    pub n: usize,
    /// Records above the cap.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubnetAggregate {
    pub key: SubnetKey,
    pub devices: usize,
    /// Distinct full (untruncated) addresses.
    pub addresses: usize,
    pub origin: GeoPoint,
    pub points: Vec<PlanePoint>,
    /// Clusters too far from the origin to project.
    pub out_of_range: usize,
    pub medioid: PlanePoint,
    pub medioid_geo: GeoPoint,
    /// One entry per configured fraction, in config order.
    pub scales: Vec<(f64, HullScale)>,
    pub mean_error: BTreeMap<Arc<str>, MeanError>,
    pub visits: VisitHistogram,
    pub passes: bool,
}

impl SubnetAggregate {
    pub fn scale_at(&self, fraction: f64) -> Option<&HullScale> {
        self.scales.iter().find(|(f, _)| *f == fraction).map(|(_, s)| s)
    }

    pub fn passes_at(&self, min_devices: usize, min_addresses: usize) -> bool {
        self.devices >= min_devices && self.addresses >= min_addresses
    }
}

fn geo_median(points: &[GeoPoint]) -> GeoPoint {
    let lat: Vec<PlanePoint> = points.iter().map(|p| PlanePoint::new(p.lon, p.lat)).collect();
    let m = medioid(&lat).expect("non-empty group");
    GeoPoint::new(m.y, m.x)
}

/// Region center nearest the point when it is within projection range,
/// otherwise the point itself.
pub fn projection_origin(p: GeoPoint, regions: &[CityRegion]) -> GeoPoint {
    regions
        .iter()
        .filter_map(|r| vincenty_distance(r.center(), p).ok().map(|d| (d, r.center())))
        .filter(|(d, _)| *d <= MAX_PROJECTION_RANGE_M)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(p, |(_, c)| c)
}

fn aggregate_one(
    key: SubnetKey,
    members: &[&LocationCluster],
    errors: &[&ErrorRecord],
    regions: &[CityRegion],
    cfg: &ScaleConfig,
) -> Result<Option<SubnetAggregate>> {
    let geo: Vec<GeoPoint> = members.iter().map(|c| c.position).collect();
    let origin = projection_origin(geo_median(&geo), regions);
    let proj = LocalProjection::new(origin)?;
    let mut points = Vec::with_capacity(geo.len());
    let mut out_of_range = 0;
    for p in &geo {
        match proj.project(*p) {
            Ok(q) => points.push(q),
            Err(_) => out_of_range += 1,
        }
    }
    if points.is_empty() {
        return Ok(None);
    }
    let devices = members.iter().map(|c| c.device_id.as_str()).collect::<HashSet<_>>().len();
    let addresses = members
        .iter()
        .filter(|c| !c.ip.truncated)
        .map(|c| c.ip.addr)
        .collect::<HashSet<_>>()
        .len();
    let center = medioid(&points)?;
    let scales = cfg
        .fractions
        .iter()
        .map(|f| Ok((*f, hull_scale(&points, *f, cfg.hull_points)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut sums: BTreeMap<Arc<str>, (f64, usize, usize)> = BTreeMap::new();
    for e in errors {
        let s = sums.entry(e.provider.clone()).or_default();
        if e.error_m <= cfg.error_cap_m {
            s.0 += e.error_m;
            s.1 += 1;
        } else {
            s.2 += 1;
        }
    }
    let mean_error = sums
        .into_iter()
        .filter(|(_, (_, n, _))| *n > 0)
        .map(|(k, (sum, n, discarded))| (k, MeanError { mean_m: sum / n as f64, n, discarded }))
        .collect();

    Ok(Some(SubnetAggregate {
        key,
        devices,
        addresses,
        origin,
        points,
        out_of_range,
        medioid: center,
        medioid_geo: proj.unproject(center)?,
        scales,
        mean_error,
        visits: visit_histogram(members.iter().copied()),
        passes: devices >= cfg.min_devices && addresses >= cfg.min_addresses,
    }))
}

/// Aggregates the selected clusters by /24 (or /48) subnet. `errors` refer to
/// positions in `clusters`. Output is sorted by subnet.
pub fn subnet_aggregate(
    clusters: &[LocationCluster],
    selection: &[usize],
    errors: &[ErrorRecord],
    regions: &[CityRegion],
    cfg: &ScaleConfig,
) -> Result<Vec<SubnetAggregate>> {
    let mut groups: HashMap<SubnetKey, Vec<usize>> = HashMap::new();
    for &i in selection {
        if let Ok(k) = subnet_key(clusters[i].ip.addr) {
            groups.entry(k).or_default().push(i);
        }
    }
    let mut errors_by_cluster: HashMap<usize, Vec<&ErrorRecord>> = HashMap::new();
    for e in errors {
        errors_by_cluster.entry(e.cluster).or_default().push(e);
    }
    let mut keys: Vec<SubnetKey> = groups.keys().copied().collect();
    keys.sort();
    let results: Vec<Result<Option<SubnetAggregate>>> = keys
        .par_iter()
        .map(|k| {
            let idx = &groups[k];
            let members: Vec<&LocationCluster> = idx.iter().map(|&i| &clusters[i]).collect();
            let errs: Vec<&ErrorRecord> = idx
                .iter()
                .filter_map(|i| errors_by_cluster.get(i))
                .flatten()
                .copied()
                .collect();
            aggregate_one(*k, &members, &errs, regions, cfg)
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        if let Some(a) = r? {
            out.push(a);
        }
    }
    Ok(out)
}

/// Pearson correlation between hull scale at `fraction` and mean error for
/// `provider`, across subnets that pass the device and address cuts.
pub fn scale_error_correlation(aggs: &[SubnetAggregate], fraction: f64, provider: &str) -> Correlation {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for a in aggs.iter().filter(|a| a.passes) {
        if let (Some(s), Some(e)) = (a.scale_at(fraction), a.mean_error.get(provider)) {
            x.push(s.scale_m);
            y.push(e.mean_m);
        }
    }
    pearson(&x, &y, None)
}
