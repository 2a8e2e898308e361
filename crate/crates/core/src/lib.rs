//! Measures how far IP-geolocation predictions fall from GPS-tagged device
//! reports, and how tightly residential subnets cluster in space.

pub mod enrichment;
pub mod error;
pub mod geodesy;
pub mod metrics;
pub mod model;
pub mod report;
pub mod synthgen;

pub use error::{Error, Result};
pub use geodesy::{GeoPoint, PlanePoint};
pub use model::{ClusterClass, ClusterIp, FilterPolicy, LocationCluster};
