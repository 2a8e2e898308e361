//! Probability that a device holds the same address `d` nights later.

use std::collections::BTreeMap;
use std::net::IpAddr;

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{nights_touched, LocationCluster, UtcOffset};

/// Pair counts by night gap `d`, for `d` in `0..=d_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChurnCurve {
    pub pairs: Vec<u64>,
    pub same: Vec<u64>,
}

impl ChurnCurve {
    pub fn new(d_max: usize) -> Self {
        ChurnCurve { pairs: vec![0; d_max + 1], same: vec![0; d_max + 1] }
    }

    pub fn d_max(&self) -> usize {
        self.pairs.len() - 1
    }

    pub fn share(&self, d: usize) -> Option<f64> {
        let n = *self.pairs.get(d)?;
        (n > 0).then(|| self.same[d] as f64 / n as f64)
    }

    pub fn merge(&mut self, other: &ChurnCurve) {
        for d in 0..self.pairs.len().min(other.pairs.len()) {
            self.pairs[d] += other.pairs[d];
            self.same[d] += other.same[d];
        }
    }
}

/// One device's address set per night, nights ascending, addresses sorted.
fn count_group(nights: &[(i64, Vec<IpAddr>)], curve: &mut ChurnCurve) {
    let d_max = curve.d_max() as i64;
    for (i, (n0, a)) in nights.iter().enumerate() {
        // a night paired with itself: every observation trivially matches
        curve.pairs[0] += a.len() as u64;
        curve.same[0] += a.len() as u64;
        for (n1, b) in &nights[i + 1..] {
            let d = n1 - n0;
            if d > d_max {
                break;
            }
            curve.pairs[d as usize] += (a.len() * b.len()) as u64;
            curve.same[d as usize] += a.iter().filter(|x| b.binary_search(x).is_ok()).count() as u64;
        }
    }
}

/// Churn curves per ISP label.
///
/// `isp[i]` labels `clusters[i]`; clusters without a label, with truncated
/// addresses, or touching no night are skipped. A cluster spanning several
/// nights counts once on each. Duplicate (device, ISP, night, address)
/// observations collapse to one.
pub fn churn_curve(
    clusters: &[LocationCluster],
    isp: &[Option<&str>],
    zone: UtcOffset,
    d_max: usize,
) -> BTreeMap<String, ChurnCurve> {
    assert_eq!(clusters.len(), isp.len());
    let mut obs: Vec<(&str, &str, i64, IpAddr)> = Vec::new();
    for (c, label) in clusters.iter().zip(isp) {
        let Some(label) = label else { continue };
        if c.ip.truncated {
            continue;
        }
        for night in nights_touched(c.t_start, c.t_end, zone) {
            obs.push((label, c.device_id.as_str(), night, c.ip.addr));
        }
    }
    obs.par_sort_unstable();
    obs.dedup();

    let mut bounds = Vec::new();
    let mut start = 0;
    for i in 1..=obs.len() {
        if i == obs.len() || (obs[i].0, obs[i].1) != (obs[start].0, obs[start].1) {
            bounds.push((start, i));
            start = i;
        }
    }
    let partials: Vec<(&str, ChurnCurve)> = bounds
        .par_iter()
        .map(|&(s, e)| {
            let mut nights: Vec<(i64, Vec<IpAddr>)> = Vec::new();
            for o in &obs[s..e] {
                match nights.last_mut() {
                    Some((n, ips)) if *n == o.2 => ips.push(o.3),
                    _ => nights.push((o.2, vec![o.3])),
                }
            }
            let mut curve = ChurnCurve::new(d_max);
            count_group(&nights, &mut curve);
            (obs[s].0, curve)
        })
        .collect();
    let mut out: BTreeMap<String, ChurnCurve> = BTreeMap::new();
    for (label, curve) in partials {
        out.entry(label.to_string()).or_insert_with(|| ChurnCurve::new(d_max)).merge(&curve);
    }
    out
}
