//! Joins location reports to geolocation-database predictions and to
//! registry organizations.

mod geodb;
mod prefix;
mod registry;
mod rules;
mod score;

pub use geodb::{DbEntry, GeoDbSnapshot, SnapshotWindow};
pub use prefix::{Cidr, PrefixTable};
pub use registry::{load_nic_table, resolve_org, Registry, RegistryRecord, Resolution};
pub use rules::{classify_org, normalize_org_name, Category, Modality, OrgClass, Rule, RuleTable};
pub use score::{score_errors, ErrorRecord, ScoreOutput, DEFAULT_TOO_CLOSE_M};
