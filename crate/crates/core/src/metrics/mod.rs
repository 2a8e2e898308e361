//! Estimators over scored and enriched clusters.

mod churn;
mod ecdf;
mod movement;
mod spatial;
mod stats;
mod subnet;
mod visits;

pub use churn::{churn_curve, ChurnCurve};
pub use ecdf::{
    cohort_compare, ecdf_and_quantiles, summarize_cohorts, CohortKey, CohortStats, Comparison, Dimension, EcdfTable,
    QuantileReport, DEFAULT_QUANTILES,
};
pub use movement::{
    medioid_distance, subnet_movement, Displacement, MovementReport, PersistenceRow,
    DEFAULT_PERSISTENCE_LADDER,
};
pub use spatial::{
    attenuation_analysis, attribute_correlation, modality_share, AttenuationReport, DecileRow,
    LayerLocator, ModalityRow,
};
pub use stats::{mean, ols, pearson, quantile_sorted, Correlation, OlsFit};
pub use subnet::{
    projection_origin, scale_error_correlation, subnet_aggregate, MeanError, ScaleConfig,
    SubnetAggregate,
};
pub use visits::{visit_histogram, VisitHistogram};
