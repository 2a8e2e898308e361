//! Synthetic GPS clusters, database snapshots and registry dumps with a
//! ground-truth sidecar.

mod generate;
mod oracle;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::enrichment::{Category, Modality};
use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;
use crate::model::{CityRegion, UtcOffset};

pub use generate::{generate, write_dataset, Dataset, DatasetPaths};
pub use oracle::{
    expected_metrics, rayleigh_quantile, DeviceTruth, EchoTruth, GroundTruthSidecar, IspTruth,
    OracleReport, ProviderTruth, SubnetTruth,
};

/// Distribution of the generative f = 0.9 hull scale of a subnet, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleDist {
    LogNormal { median_m: f64, sigma: f64 },
    LogUniform { min_m: f64, max_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IspProfile {
    pub dba_name: String,
    pub org_name: String,
    pub modality: Modality,
    #[serde(default = "default_category")]
    pub category: Category,
    pub subnet_count: usize,
    /// Relative weight when assigning devices to ISPs of the same modality.
    #[serde(default = "one")]
    pub market_share: f64,
    pub scale: ScaleDist,
    /// Per-night probability of keeping the previous night's address.
    #[serde(default = "one")]
    pub stickiness: f64,
    /// Fraction of subnets handing out a fresh random address on every visit.
    #[serde(default)]
    pub ephemeral_share: f64,
}

fn default_category() -> Category {
    Category::ConsumerIsp
}
fn one() -> f64 {
    1.0
}

impl IspProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("profile {}: {what}", self.dba_name)));
        if !(0.0..=1.0).contains(&self.stickiness) {
            return bad("stickiness outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.ephemeral_share) {
            return bad("ephemeral_share outside [0, 1]");
        }
        if self.subnet_count == 0 {
            return bad("subnet_count is zero");
        }
        if !(self.market_share >= 0.0) {
            return bad("negative market share");
        }
        match self.scale {
            ScaleDist::LogNormal { median_m, sigma } if median_m > 0.0 && sigma >= 0.0 => Ok(()),
            ScaleDist::LogUniform { min_m, max_m } if min_m > 0.0 && max_m >= min_m => Ok(()),
            _ => bad("invalid scale distribution"),
        }
    }
}

/// How a provider's predictions relate to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DbMode {
    /// A /32 at the home of the address's first holder.
    Perfect,
    /// A /24 at the subnet's true center.
    SubnetCentroid,
    /// A /32 at the holder's home displaced by N(0, sigma^2) on each axis.
    OffsetGaussian { sigma_m: f64 },
    /// A `share` of subnets mapped to one fixed point, the rest to centroids.
    DefaultLocation { lat: f64, lon: f64, share: f64 },
    /// A /32 at a uniformly random point of the holder's region.
    UniformRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbErrorModel {
    pub provider: String,
    #[serde(flatten)]
    pub mode: DbMode,
    /// Fraction of clusters whose reported position is replaced by this
    /// provider's prediction.
    #[serde(default)]
    pub echo_share: f64,
}

/// Square tract grid over each region's bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractGrid {
    pub rows: usize,
    pub cols: usize,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 8, 1).expect("valid date")
}
fn default_offset() -> UtcOffset {
    UtcOffset::from_hours(-5)
}
fn default_urban() -> f64 {
    0.6
}
fn default_day_rate() -> f64 {
    0.5
}
fn default_travel() -> f64 {
    0.1
}
fn default_children() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub regions: Vec<CityRegion>,
    pub profiles: Vec<IspProfile>,
    pub n_devices: usize,
    pub n_nights: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default = "default_offset")]
    pub utc_offset: UtcOffset,
    /// Weight of the dense component when placing subnet centers.
    #[serde(default = "default_urban")]
    pub urban_weight: f64,
    /// Expected daytime clusters per device per day (on a mobile carrier).
    #[serde(default = "default_day_rate")]
    pub day_rate: f64,
    #[serde(default = "default_travel")]
    pub travel_share: f64,
    /// Standard deviation of positional noise on each cluster, meters.
    #[serde(default)]
    pub gps_jitter_m: f64,
    pub providers: Vec<DbErrorModel>,
    /// Unrelated /24 entries added to every snapshot.
    #[serde(default)]
    pub extra_prefixes: usize,
    /// Customer /28 records per fixed ISP that point back to the ISP block.
    #[serde(default = "default_children")]
    pub registry_children: usize,
    #[serde(default)]
    pub tracts: Option<TractGrid>,
}

impl SynthConfig {
    /// A single-region configuration with one fixed ISP and a perfect database.
    pub fn simple(seed: u64, n_devices: usize, n_nights: usize) -> Self {
        SynthConfig {
            seed,
            regions: vec![CityRegion::new("chicago", GeoPoint::new(41.8781, -87.6298))],
            profiles: vec![IspProfile {
                dba_name: "Comcast".into(),
                org_name: "Comcast Cable Communications, LLC".into(),
                modality: Modality::Fixed,
                category: Category::ConsumerIsp,
                subnet_count: n_devices.div_ceil(100).max(1),
                market_share: 1.0,
                scale: ScaleDist::LogNormal { median_m: 4000.0, sigma: 0.5 },
                stickiness: 1.0,
                ephemeral_share: 0.0,
            }],
            n_devices,
            n_nights,
            start_date: default_start(),
            utc_offset: default_offset(),
            urban_weight: default_urban(),
            day_rate: 0.0,
            travel_share: default_travel(),
            gps_jitter_m: 0.0,
            providers: vec![DbErrorModel {
                provider: "perfect".into(),
                mode: DbMode::Perfect,
                echo_share: 0.0,
            }],
            extra_prefixes: 0,
            registry_children: default_children(),
            tracts: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::Config("synthetic config needs at least one region".into()));
        }
        if !self.profiles.iter().any(|p| p.modality == Modality::Fixed) {
            return Err(Error::Config("synthetic config needs a fixed-line profile".into()));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        for m in &self.providers {
            if !(0.0..=1.0).contains(&m.echo_share) {
                return Err(Error::Config(format!("provider {}: echo_share outside [0, 1]", m.provider)));
            }
            match m.mode {
                DbMode::OffsetGaussian { sigma_m } if !(sigma_m >= 0.0) => {
                    return Err(Error::Config(format!("provider {}: negative sigma", m.provider)))
                }
                DbMode::DefaultLocation { share, .. } if !(0.0..=1.0).contains(&share) => {
                    return Err(Error::Config(format!("provider {}: share outside [0, 1]", m.provider)))
                }
                _ => {}
            }
        }
        if !(0.0..=1.0).contains(&self.urban_weight) || !(0.0..=1.0).contains(&self.travel_share) {
            return Err(Error::Config("mixture weights must lie in [0, 1]".into()));
        }
        if !(self.day_rate >= 0.0) || !(self.gps_jitter_m >= 0.0) {
            return Err(Error::Config("day_rate and gps_jitter_m must be non-negative".into()));
        }
        Ok(())
    }
}
