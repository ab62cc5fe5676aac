//! Workloads, experiments, sweeps and the metrics they produce.

mod experiment;
mod metrics;
mod sweep;
pub mod vocab;
mod workload;

pub use experiment::{
    collect_metrics, prepare_experiment, run_experiment, run_experiment_traced, NetworkSpec,
};
pub use metrics::{
    percent, percentile_nearest_rank, AttackRow, CoverageSummary, ExperimentMetrics,
    LatencySummary, MessageRecord, SendSummary, TypeRow,
};
pub use sweep::{least_squares_slope, run_scalability_sweep, sweep_csv, sweep_json, SweepPoint};
pub use workload::{generate_workload, AttackPlan, ProposerPolicy, WorkloadItem, WorkloadSpec};
