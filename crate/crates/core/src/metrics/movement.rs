//! Stability of subnets between two observation periods.

use std::collections::BTreeMap;

use serde::Serialize;

use super::SubnetAggregate;
use crate::error::Result;
use crate::geodesy::LocalProjection;
use crate::model::SubnetKey;

pub const DEFAULT_PERSISTENCE_LADDER: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Displacement {
    pub key: SubnetKey,
    pub distance_m: f64,
}

/// Share of subnets passing `threshold` devices and addresses in one period
/// that pass the base cut in the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistenceRow {
    pub threshold: usize,
    pub forward_n: usize,
    pub forward_kept: usize,
    pub backward_n: usize,
    pub backward_kept: usize,
}

impl PersistenceRow {
    pub fn forward_share(&self) -> Option<f64> {
        (self.forward_n > 0).then(|| self.forward_kept as f64 / self.forward_n as f64)
    }

    pub fn backward_share(&self) -> Option<f64> {
        (self.backward_n > 0).then(|| self.backward_kept as f64 / self.backward_n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovementReport {
    pub displacements: Vec<Displacement>,
    pub persistence: Vec<PersistenceRow>,
}

/// Planar distance between two medioids. When the aggregates were projected
/// about different origins, each medioid is carried into the other's frame
/// and the two distances are averaged, which keeps the result symmetric.
pub fn medioid_distance(a: &SubnetAggregate, b: &SubnetAggregate) -> Result<f64> {
    if a.origin == b.origin {
        return Ok(a.medioid.distance(&b.medioid));
    }
    let pa = LocalProjection::new(a.origin)?;
    let pb = LocalProjection::new(b.origin)?;
    let d1 = a.medioid.distance(&pa.project(b.medioid_geo)?);
    let d2 = b.medioid.distance(&pb.project(a.medioid_geo)?);
    Ok((d1 + d2) / 2.0)
}

fn persistence(
    from: &BTreeMap<SubnetKey, &SubnetAggregate>,
    to: &BTreeMap<SubnetKey, &SubnetAggregate>,
    threshold: usize,
    base: (usize, usize),
) -> (usize, usize) {
    let passing: Vec<&SubnetKey> = from
        .iter()
        .filter(|(_, a)| a.passes_at(threshold, threshold))
        .map(|(k, _)| k)
        .collect();
    let kept = passing
        .iter()
        .filter(|k| to.get(**k).map_or(false, |b| b.passes_at(base.0, base.1)))
        .count();
    (passing.len(), kept)
}

/// Medioid displacement for subnets passing the base cut in both periods,
/// plus persistence rates across the threshold ladder in both directions.
pub fn subnet_movement(
    period1: &[SubnetAggregate],
    period2: &[SubnetAggregate],
    base: (usize, usize),
    ladder: &[usize],
) -> Result<MovementReport> {
    let p1: BTreeMap<SubnetKey, &SubnetAggregate> = period1.iter().map(|a| (a.key, a)).collect();
    let p2: BTreeMap<SubnetKey, &SubnetAggregate> = period2.iter().map(|a| (a.key, a)).collect();
    let mut displacements = Vec::new();
    for (k, a) in &p1 {
        if let Some(b) = p2.get(k) {
            if a.passes_at(base.0, base.1) && b.passes_at(base.0, base.1) {
                displacements.push(Displacement { key: *k, distance_m: medioid_distance(a, b)? });
            }
        }
    }
    let persistence = ladder
        .iter()
        .map(|&t| {
            let (forward_n, forward_kept) = persistence(&p1, &p2, t, base);
            let (backward_n, backward_kept) = persistence(&p2, &p1, t, base);
            PersistenceRow { threshold: t, forward_n, forward_kept, backward_n, backward_kept }
        })
        .collect();
    Ok(MovementReport { displacements, persistence })
}
