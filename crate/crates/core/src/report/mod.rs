//! Run orchestration, output formatting and plotting.

mod config;
mod format;
mod pipeline;
mod plot;

pub use config::{parse_metric_list, GeoDbInput, Inputs, MetricKind, ReportOptions, RunConfig};
pub use format::{fmt_g6, fmt_opt, round_sig};
pub use pipeline::{
    check, config_for_dataset, load_inputs, load_period, run, run_with_threads, CheckReport, LoadedInputs, Period,
    RunOutcome, INCOMPLETE_MARKER,
    thread_pool,
};
pub use rayon::ThreadPool;
pub use plot::{plot, PlotOutcome};
