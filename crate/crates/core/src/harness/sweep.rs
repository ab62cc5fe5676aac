use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, NetworkSpec};
use super::metrics::{into_string, ExperimentMetrics};
use super::workload::WorkloadSpec;
use crate::error::{ConfigError, SimError};

/// One network size of a scalability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub f: usize,
    pub n: usize,
    pub threshold: usize,
    pub metrics: ExperimentMetrics,
}

/// Runs one experiment per `f` at `n = 3f + 1`, all with the same seed.
/// Results come back in `f_values` order whatever `jobs` is.
pub fn run_scalability_sweep(
    f_values: &[usize],
    base: &NetworkSpec,
    workload: &WorkloadSpec,
    seed: u64,
    jobs: usize,
) -> Result<Vec<SweepPoint>, SimError> {
    if f_values.is_empty() {
        return Err(ConfigError::invalid("sweep_f", "range is empty").into());
    }
    if let Some(f) = f_values.iter().find(|f| **f == 0) {
        return Err(ConfigError::invalid("sweep_f", format!("f must be >= 1, got {f}")).into());
    }
    if jobs == 0 {
        return Err(ConfigError::invalid("jobs", "must be positive").into());
    }
    let point = |f: &usize| -> Result<SweepPoint, SimError> {
        let spec = base.with_f(*f);
        let metrics = run_experiment(&spec, workload, seed)?;
        Ok(SweepPoint {
            f: *f,
            n: metrics.n,
            threshold: metrics.threshold,
            metrics,
        })
    };
    run_points(f_values, jobs, point)
}

#[cfg(feature = "parallel")]
fn run_points<F>(f_values: &[usize], jobs: usize, point: F) -> Result<Vec<SweepPoint>, SimError>
where
    F: Fn(&usize) -> Result<SweepPoint, SimError> + Sync,
{
    use rayon::prelude::*;
    if jobs == 1 {
        return f_values.iter().map(point).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError::invalid("jobs", e.to_string()))?;
    pool.install(|| f_values.par_iter().map(&point).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_points<F>(f_values: &[usize], _jobs: usize, point: F) -> Result<Vec<SweepPoint>, SimError>
where
    F: Fn(&usize) -> Result<SweepPoint, SimError>,
{
    f_values.iter().map(point).collect()
}

/// Plot data: one row per network size.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n",
        "f",
        "threshold",
        "gossip_sends_mean",
        "gossip_sends_max",
        "vote_sends_mean",
        "latency_mean_ms",
        "latency_p95_ms",
        "coverage_mean",
        "accepted",
        "total",
    ])
    .expect("in-memory write");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    for p in points {
        let m = &p.metrics;
        w.write_record([
            p.n.to_string(),
            p.f.to_string(),
            p.threshold.to_string(),
            opt(m.sends.gossip_mean),
            m.sends.gossip_max.to_string(),
            opt(m.sends.vote_mean),
            opt(m.latency.mean_ms),
            m.latency.p95_ms.map_or(String::new(), |v| v.to_string()),
            opt(m.coverage.mean),
            m.table1_total.accepted.to_string(),
            m.table1_total.total.to_string(),
        ])
        .expect("in-memory write");
    }
    into_string(w)
}

pub fn sweep_json(points: &[SweepPoint]) -> String {
    serde_json::to_string_pretty(points).expect("sweep points serialize")
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
