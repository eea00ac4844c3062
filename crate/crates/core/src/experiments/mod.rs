//! Monte Carlo studies and timing benchmarks.

mod bench;
mod metrics;
mod montecarlo;
pub mod report;

pub use bench::{
    loglog_fit, timing_benchmark, BenchConfig, BenchEstimate, LogLogFit, Method, MethodTiming,
    TimingPoint, TimingReport,
};
pub use metrics::{compute_metrics, median, quantile, Metrics};
pub use montecarlo::{
    buffer_sweep, run_montecarlo, run_replication, CellTimes, FailedRep, FlEstimate, FlMetrics,
    McConfig, McReport, McRow, PlEstimate, PlMetrics, Replication, StageTimes,
};
