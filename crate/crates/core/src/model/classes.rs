use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClusterClass, LocationCluster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: ClusterClass,
    pub clusters: u64,
    pub bumps: u64,
    pub cluster_share: f64,
    pub bump_share: f64,
}

/// Frequency of cluster classes, by clusters and by bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    pub rows: Vec<ClassRow>,
}

pub fn tabulate_classes<'a>(clusters: impl IntoIterator<Item = &'a LocationCluster>) -> ClassTable {
    let mut counts: BTreeMap<ClusterClass, (u64, u64)> = BTreeMap::new();
    for c in clusters {
        let e = counts.entry(c.class).or_default();
        e.0 += 1;
        e.1 += c.bump_count as u64;
    }
    let total_clusters: u64 = counts.values().map(|v| v.0).sum();
    let total_bumps: u64 = counts.values().map(|v| v.1).sum();
    let share = |x: u64, t: u64| if t == 0 { 0.0 } else { x as f64 / t as f64 };
    let rows = ClusterClass::ALL
        .into_iter()
        .map(|class| {
            let (clusters, bumps) = counts.get(&class).copied().unwrap_or_default();
            ClassRow {
                class,
                clusters,
                bumps,
                cluster_share: share(clusters, total_clusters),
                bump_share: share(bumps, total_bumps),
            }
        })
        .collect();
    ClassTable { rows }
}
