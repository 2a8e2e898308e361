//! Run configuration, read from TOML.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::enrichment::{SnapshotWindow, DEFAULT_TOO_CLOSE_M};
use crate::error::{Error, Result};
use crate::metrics::{Dimension, ScaleConfig, DEFAULT_PERSISTENCE_LADDER};
use crate::model::{FilterPolicy, UtcOffset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Quantiles,
    Classes,
    TooClose,
    Compare,
    Subnets,
    Visits,
    Churn,
    Movement,
    Modality,
    PolygonCorrelation,
    Attenuation,
}

impl MetricKind {
    pub const ALL: [MetricKind; 11] = [
        MetricKind::Quantiles,
        MetricKind::Classes,
        MetricKind::TooClose,
        MetricKind::Compare,
        MetricKind::Subnets,
        MetricKind::Visits,
        MetricKind::Churn,
        MetricKind::Movement,
        MetricKind::Modality,
        MetricKind::PolygonCorrelation,
        MetricKind::Attenuation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Quantiles => "quantiles",
            MetricKind::Classes => "classes",
            MetricKind::TooClose => "too_close",
            MetricKind::Compare => "compare",
            MetricKind::Subnets => "subnets",
            MetricKind::Visits => "visits",
            MetricKind::Churn => "churn",
            MetricKind::Movement => "movement",
            MetricKind::Modality => "modality",
            MetricKind::PolygonCorrelation => "polygon_correlation",
            MetricKind::Attenuation => "attenuation",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Parses a comma-separated metric list.
pub fn parse_metric_list(s: &str) -> Result<Vec<MetricKind>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoDbInput {
    pub provider: String,
    pub path: PathBuf,
    pub snapshot_date: NaiveDate,
    pub window_from: NaiveDate,
    pub window_to: NaiveDate,
}

impl GeoDbInput {
    pub fn window(&self) -> Result<SnapshotWindow> {
        SnapshotWindow::new(self.window_from, self.window_to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub clusters: PathBuf,
    /// Second observation period, for subnet movement.
    #[serde(default)]
    pub clusters_period2: Option<PathBuf>,
    pub registry: PathBuf,
    /// Defaults to the built-in rule table.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    /// Address delegation table (`cidr,registry`) for the foreign-registry cut.
    #[serde(default)]
    pub nic: Option<PathBuf>,
    #[serde(default)]
    pub polygons: Vec<PathBuf>,
    #[serde(default)]
    pub geodb: Vec<GeoDbInput>,
}

fn default_group_by() -> Vec<Vec<Dimension>> {
    use Dimension::*;
    vec![
        vec![Provider],
        vec![Provider, City],
        vec![Provider, Modality],
        vec![Provider, Dba],
        vec![Provider, ClassGroup],
        vec![Provider, AccuracyBin],
    ]
}
fn default_too_close() -> f64 {
    DEFAULT_TOO_CLOSE_M
}
fn default_d_max() -> usize {
    60
}
fn default_ecdf_points() -> usize {
    2000
}
fn default_ladder() -> Vec<usize> {
    DEFAULT_PERSISTENCE_LADDER.to_vec()
}
fn default_polygon_attrs() -> Vec<String> {
    vec!["density".into(), "log_mhi".into()]
}
fn default_attenuation_attr() -> String {
    "log_mhi".into()
}
fn default_class_attr() -> String {
    "class".into()
}
fn default_visit_split() -> f64 {
    20_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Each entry is one cohort grouping; an empty list is the whole sample.
    #[serde(default = "default_group_by")]
    pub group_by: Vec<Vec<Dimension>>,
    #[serde(default = "default_too_close")]
    pub too_close_m: f64,
    #[serde(default = "default_d_max")]
    pub churn_d_max: usize,
    #[serde(default = "default_ecdf_points")]
    pub ecdf_max_points: usize,
    #[serde(default = "default_ladder")]
    pub persistence_ladder: Vec<usize>,
    #[serde(default = "default_polygon_attrs")]
    pub polygon_attributes: Vec<String>,
    #[serde(default = "default_attenuation_attr")]
    pub attenuation_attribute: String,
    #[serde(default = "default_class_attr")]
    pub polygon_class_attribute: String,
    /// Visit histograms are also split at this f = 0.75 scale.
    #[serde(default = "default_visit_split")]
    pub visit_scale_split_m: f64,
    /// Projection origin for planar polygon layers; defaults to the first region.
    #[serde(default)]
    pub polygon_origin: Option<crate::geodesy::GeoPoint>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub utc_offset: UtcOffset,
    /// Empty selects every metric.
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    pub inputs: Inputs,
    #[serde(default)]
    pub policy: FilterPolicy,
    #[serde(default)]
    pub scale: ScaleConfig,
    #[serde(default)]
    pub report: ReportOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        let i = &mut self.inputs;
        fix(&mut i.clusters);
        fix(&mut i.registry);
        i.clusters_period2.iter_mut().for_each(fix);
        i.rules.iter_mut().for_each(fix);
        i.nic.iter_mut().for_each(fix);
        i.polygons.iter_mut().for_each(fix);
        i.geodb.iter_mut().for_each(|g| fix(&mut g.path));
    }

    pub fn wants(&self, m: MetricKind) -> bool {
        self.metrics.is_empty() || self.metrics.contains(&m)
    }

    /// Every referenced file exists, provider labels are unique, and all
    /// snapshot windows agree.
    pub fn validate(&self) -> Result<()> {
        let i = &self.inputs;
        let mut files: Vec<&Path> = vec![&i.clusters, &i.registry];
        files.extend(i.clusters_period2.as_deref());
        files.extend(i.rules.as_deref());
        files.extend(i.nic.as_deref());
        files.extend(i.polygons.iter().map(PathBuf::as_path));
        files.extend(i.geodb.iter().map(|g| g.path.as_path()));
        if let Some(missing) = files.into_iter().find(|p| !p.is_file()) {
            return Err(Error::MissingFile(missing.to_path_buf()));
        }
        let mut seen = BTreeSet::new();
        for g in &i.geodb {
            if !seen.insert(g.provider.as_str()) {
                return Err(Error::Config(format!("provider {:?} listed twice", g.provider)));
            }
            g.window()?;
        }
        if let Some(first) = i.geodb.first() {
            if let Some(other) = i.geodb.iter().find(|g| (g.window_from, g.window_to) != (first.window_from, first.window_to)) {
                return Err(Error::Config(format!(
                    "snapshot windows differ: {} covers {}..{}, {} covers {}..{}",
                    first.provider, first.window_from, first.window_to, other.provider, other.window_from, other.window_to
                )));
            }
        }
        for f in &self.scale.fractions {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(Error::Config(format!("scale fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}
