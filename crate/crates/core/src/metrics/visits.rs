//! How often a device comes back to the same address.

use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;

use serde::Serialize;

use crate::model::LocationCluster;

/// Number of (device, address) pairs seen exactly `v` times, keyed by `v`.
/// Each cluster counts as one visit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VisitHistogram {
    pub pairs_by_visits: BTreeMap<u64, u64>,
}

impl VisitHistogram {
    pub fn from_visit_counts(counts: impl IntoIterator<Item = u64>) -> Self {
        let mut h = VisitHistogram::default();
        for v in counts.into_iter().filter(|v| *v > 0) {
            *h.pairs_by_visits.entry(v).or_default() += 1;
        }
        h
    }

    pub fn merge(&mut self, other: &VisitHistogram) {
        for (v, n) in &other.pairs_by_visits {
            *self.pairs_by_visits.entry(*v).or_default() += n;
        }
    }

    pub fn total_pairs(&self) -> u64 {
        self.pairs_by_visits.values().sum()
    }

    pub fn total_visits(&self) -> u64 {
        self.pairs_by_visits.iter().map(|(v, n)| v * n).sum()
    }

    /// Bin shares where a pair with `v` visits carries weight `v`.
    pub fn weighted_shares(&self) -> Vec<(u64, f64)> {
        let total = self.total_visits() as f64;
        self.pairs_by_visits.iter().map(|(v, n)| (*v, (v * n) as f64 / total)).collect()
    }

    /// Bin shares where each pair carries weight 1.
    pub fn unweighted_shares(&self) -> Vec<(u64, f64)> {
        let total = self.total_pairs() as f64;
        self.pairs_by_visits.iter().map(|(v, n)| (*v, *n as f64 / total)).collect()
    }

    pub fn weighted_share(&self, bin: u64) -> f64 {
        let total = self.total_visits();
        if total == 0 {
            return 0.0;
        }
        (bin * self.pairs_by_visits.get(&bin).copied().unwrap_or(0)) as f64 / total as f64
    }
}

/// Visit histogram over address-level clusters; truncated IPs are skipped.
pub fn visit_histogram<'a>(clusters: impl IntoIterator<Item = &'a LocationCluster>) -> VisitHistogram {
    let mut counts: HashMap<(&'a str, IpAddr), u64> = HashMap::new();
    for c in clusters {
        if !c.ip.truncated {
            *counts.entry((c.device_id.as_str(), c.ip.addr)).or_default() += 1;
        }
    }
    VisitHistogram::from_visit_counts(counts.into_values())
}
