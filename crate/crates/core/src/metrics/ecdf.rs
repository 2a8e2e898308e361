//! Error distributions per cohort: empirical CDFs, quantiles, and
//! two-sample comparisons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::quantile_sorted;
use crate::error::{Error, Result};

pub const DEFAULT_QUANTILES: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Grouping axes available for cohort keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    City,
    Provider,
    Dba,
    Modality,
    Category,
    ClassGroup,
    Night,
    AccuracyBin,
    PolygonClass,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::City,
        Dimension::Provider,
        Dimension::Dba,
        Dimension::Modality,
        Dimension::Category,
        Dimension::ClassGroup,
        Dimension::Night,
        Dimension::AccuracyBin,
        Dimension::PolygonClass,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::City => "city",
            Dimension::Provider => "provider",
            Dimension::Dba => "dba",
            Dimension::Modality => "modality",
            Dimension::Category => "category",
            Dimension::ClassGroup => "class_group",
            Dimension::Night => "night",
            Dimension::AccuracyBin => "accuracy_bin",
            Dimension::PolygonClass => "polygon_class",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown cohort dimension {s:?}")))
    }
}

/// `dim=value;dim=value`, or `all` for the ungrouped cohort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CohortKey(String);

impl CohortKey {
    pub fn all() -> Self {
        CohortKey("all".into())
    }

    pub fn new<'a>(parts: impl IntoIterator<Item = (Dimension, &'a str)>) -> Self {
        let joined = parts
            .into_iter()
            .map(|(d, v)| format!("{d}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        if joined.is_empty() {
            Self::all()
        } else {
            CohortKey(joined)
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// File-name friendly form.
    pub fn slug(&self) -> String {
        self.0
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for CohortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Sorted sample with its empirical distribution function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcdfTable {
    sorted: Vec<f64>,
}

impl EcdfTable {
    /// Non-finite values are dropped.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        values.retain(|v| v.is_finite());
        if values.is_empty() {
            return Err(Error::Empty("ecdf sample"));
        }
        values.sort_by(f64::total_cmp);
        Ok(EcdfTable { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Share of the sample at or below `x`.
    pub fn share_at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// One `(value, share)` step per distinct value; the last share is 1.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.sorted.iter().enumerate() {
            let share = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = share,
                _ => out.push((*v, share)),
            }
        }
        out
    }

    /// At most `max_points` steps, evenly spaced in rank, always keeping
    /// the final step.
    pub fn thinned(&self, max_points: usize) -> Vec<(f64, f64)> {
        let pts = self.points();
        if pts.len() <= max_points || max_points < 2 {
            return pts;
        }
        let last = pts.len() - 1;
        let mut out: Vec<(f64, f64)> = (0..max_points)
            .map(|k| pts[k * last / (max_points - 1)])
            .collect();
        out.dedup_by(|a, b| a.0 == b.0);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStats {
    pub ecdf: EcdfTable,
    pub quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileReport {
    pub levels: Vec<f64>,
    pub cohorts: BTreeMap<CohortKey, CohortStats>,
    /// Cohorts that had records but no finite values.
    pub empty: Vec<CohortKey>,
}

/// Groups values by cohort and summarizes each group.
pub fn ecdf_and_quantiles(
    samples: impl IntoIterator<Item = (CohortKey, f64)>,
    levels: &[f64],
) -> QuantileReport {
    let mut groups: BTreeMap<CohortKey, Vec<f64>> = BTreeMap::new();
    for (k, v) in samples {
        groups.entry(k).or_default().push(v);
    }
    summarize_cohorts(groups, levels)
}

/// Summarizes values already grouped by cohort.
pub fn summarize_cohorts(groups: BTreeMap<CohortKey, Vec<f64>>, levels: &[f64]) -> QuantileReport {
    let mut cohorts = BTreeMap::new();
    let mut empty = Vec::new();
    for (k, values) in groups {
        match EcdfTable::new(values) {
            Ok(ecdf) => {
                let quantiles = levels.iter().map(|q| ecdf.quantile(*q)).collect();
                cohorts.insert(k, CohortStats { ecdf, quantiles });
            }
            Err(_) => empty.push(k),
        }
    }
    QuantileReport { levels: levels.to_vec(), cohorts, empty }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    /// median(a) / median(b) - 1; `None` if median(b) is zero.
    pub median_ratio: Option<f64>,
    /// Largest vertical gap between the two empirical CDFs.
    pub ks: f64,
}

pub fn cohort_compare(a: &EcdfTable, b: &EcdfTable) -> Comparison {
    let mb = b.median();
    let median_ratio = if mb == 0.0 { None } else { Some(a.median() / mb - 1.0) };
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut ks: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        ks = ks.max((i as f64 / na - j as f64 / nb).abs());
    }
    Comparison { median_ratio, ks }
}
