use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// The variants split into two families: configuration problems (bad
/// paths, unreadable headers, inconsistent date windows) and data problems
/// (conflicting prefixes, registry cycles, malformed geometry). The CLI maps
/// them to distinct exit codes via [`Error::is_config`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing input file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unreadable header in {source_name}: {detail}")]
    Header { source_name: String, detail: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("conflicting duplicate prefixes: {}", .0.join(", "))]
    PrefixConflict(Vec<String>),

    #[error("cycle in registry parent chain: {}", .0.join(" -> "))]
    RegistryCycle(Vec<String>),

    #[error("invalid polygon {id}: {detail}")]
    Polygon { id: String, detail: String },

    #[error("geodesic did not converge (near-antipodal points)")]
    Antipodal,

    #[error("point is {distance_m:.0} m from the projection origin (limit {limit_m:.0} m)")]
    OutOfProjectionRange { distance_m: f64, limit_m: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the run configuration rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::MissingFile(_) | Error::Header { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
