//! Loss and duration analysis: the closed-form loss model, confidence
//! intervals, parameter sweeps and report writers.

mod loss;
mod report;
mod stats;
mod sweep;

pub use crate::controller::{FlowStats, MigrationMetrics};
pub use loss::{analytic_loss, predicted_loss, DirectionCheck, LossError, LossEstimate};
pub use report::{write_csv, write_json, write_report, Format, ReportError, SCHEMA_VERSION};
pub use stats::{linear_fit, summarize, LinearFit, Summary};
pub use sweep::{
    channel_lag_cdf, compare_strategies, induced_loss, rep_seed, sweep_rtt, sweep_table_size, table_size_template,
    CdfRow, LagCdf, RateRow, RttRow, SweepError, TableSizeRow, Variant,
};
