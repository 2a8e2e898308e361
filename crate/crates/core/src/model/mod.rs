//! Canonical record types, input parsing and per-record derived flags.

mod classes;
mod night;
mod parse;
mod subnet;

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geodesy::{vincenty_distance, GeoPoint};

pub use classes::{tabulate_classes, ClassRow, ClassTable};
pub use night::{night_flag, nights_touched, UtcOffset};
pub use parse::{
    parse_clusters, write_clusters, ParseOutput, RejectReason, RejectionTally, CLUSTER_COLUMNS,
};
pub use subnet::{special_use_range, subnet_key, SpecialUse, SubnetKey};

/// Cluster labels assigned upstream by the data vendor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClusterClass {
    Travel,
    LongAreaDwell,
    AreaDwell,
    ShortAreaDwell,
    PotentialAreaDwell,
    Ping,
    LargeVariance,
    Moving,
    Split,
}

impl ClusterClass {
    pub const ALL: [ClusterClass; 9] = [
        ClusterClass::Travel,
        ClusterClass::LongAreaDwell,
        ClusterClass::AreaDwell,
        ClusterClass::ShortAreaDwell,
        ClusterClass::PotentialAreaDwell,
        ClusterClass::Ping,
        ClusterClass::LargeVariance,
        ClusterClass::Moving,
        ClusterClass::Split,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClusterClass::Travel => "TRAVEL",
            ClusterClass::LongAreaDwell => "LONG_AREA_DWELL",
            ClusterClass::AreaDwell => "AREA_DWELL",
            ClusterClass::ShortAreaDwell => "SHORT_AREA_DWELL",
            ClusterClass::PotentialAreaDwell => "POTENTIAL_AREA_DWELL",
            ClusterClass::Ping => "PING",
            ClusterClass::LargeVariance => "LARGE_VARIANCE",
            ClusterClass::Moving => "MOVING",
            ClusterClass::Split => "SPLIT",
        }
    }

    pub fn is_travel(&self) -> bool {
        *self == ClusterClass::Travel
    }
}

impl fmt::Display for ClusterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ClusterClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown cluster class {s:?}"))
    }
}

/// The IP recorded with a cluster. Truncated values only carry their /24
/// (or /48) network, with host bits zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterIp {
    pub addr: IpAddr,
    pub truncated: bool,
}

impl ClusterIp {
    pub fn full(addr: IpAddr) -> Self {
        ClusterIp { addr, truncated: false }
    }
}

impl fmt::Display for ClusterIp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.truncated {
            let len = if self.addr.is_ipv4() { 24 } else { 48 };
            write!(f, "{}/{}", self.addr, len)
        } else {
            write!(f, "{}", self.addr)
        }
    }
}

/// One GPS-tagged observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationCluster {
    pub device_id: String,
    pub t_start: DateTime<Utc>,
    pub t_end: DateTime<Utc>,
    pub position: GeoPoint,
    pub accuracy_m: f64,
    /// Decimal digits supplied for the coarser of lat and lon.
    pub coord_decimals: u8,
    pub class: ClusterClass,
    pub ip: ClusterIp,
    pub bump_count: u32,
}

pub const DEFAULT_REGION_RADIUS_M: f64 = 64_373.76;

fn default_radius() -> f64 {
    DEFAULT_REGION_RADIUS_M
}

/// A study region: everything within `radius_m` (geodesic) of the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityRegion {
    pub name: String,
    pub center_lat: f64,
    pub center_lon: f64,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
}

impl CityRegion {
    pub fn new(name: impl Into<String>, center: GeoPoint) -> Self {
        CityRegion {
            name: name.into(),
            center_lat: center.lat,
            center_lon: center.lon,
            radius_m: DEFAULT_REGION_RADIUS_M,
        }
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(self.center_lat, self.center_lon)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        vincenty_distance(self.center(), p).map_or(false, |d| d <= self.radius_m)
    }
}

fn default_max_accuracy() -> f64 {
    50.0
}
fn default_min_decimals() -> u8 {
    5
}
fn default_true() -> bool {
    true
}
fn default_home_registry() -> String {
    "ARIN".to_string()
}

/// Row-level cuts applied while parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    #[serde(default = "default_max_accuracy")]
    pub max_accuracy_m: f64,
    #[serde(default = "default_min_decimals")]
    pub min_coord_decimals: u8,
    #[serde(default = "default_true")]
    pub exclude_special_use: bool,
    #[serde(default = "default_true")]
    pub exclude_foreign_registry: bool,
    /// Registry treated as domestic when a NIC delegation table is supplied.
    #[serde(default = "default_home_registry")]
    pub home_registry: String,
    /// Empty means no regional cut.
    #[serde(default)]
    pub regions: Vec<CityRegion>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            max_accuracy_m: default_max_accuracy(),
            min_coord_decimals: default_min_decimals(),
            exclude_special_use: true,
            exclude_foreign_registry: true,
            home_registry: default_home_registry(),
            regions: Vec::new(),
        }
    }
}

impl FilterPolicy {
    /// Indices of the regions containing `p`.
    pub fn regions_of(&self, p: GeoPoint) -> Vec<usize> {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains(p))
            .map(|(i, _)| i)
            .collect()
    }
}
