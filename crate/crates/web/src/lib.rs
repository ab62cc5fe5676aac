//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers or config text and returns a JSON string.
//! The same functions compile natively so they are tested without a browser.

use std::collections::BTreeMap;

use medgossip::config::RunConfig;
use medgossip::harness::{run_experiment_traced, AttackPlan, NetworkSpec, WorkloadSpec};
use medgossip::simnet::{Attack, TraceRecord};
use medgossip::{expected_coverage, run_experiment, run_scalability_sweep, GossipConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Runs one message through the network described by `config_text`
/// (flat `key = value`, same keys as the CLI) and returns the metrics and the
/// event trace. `attack` is empty or one of INVALID_SIGNATURE,
/// EXPIRED_TIMESTAMP, MALFORMED_CONTENT.
#[wasm_bindgen]
pub fn simulate_round(config_text: &str, attack: &str) -> Result<String, JsError> {
    simulate_round_json(config_text, attack).map_err(|e| JsError::new(&e))
}

/// Mean measured coverage against the ideal tree reach `min(1, E[N]/n)` for
/// every hop limit `1..=max_hmax`.
#[wasm_bindgen]
pub fn coverage_curve(
    n: usize,
    fanout: usize,
    max_hmax: u32,
    messages: usize,
    seed: u64,
) -> Result<String, JsError> {
    coverage_curve_json(n, fanout, max_hmax, messages, seed).map_err(|e| JsError::new(&e))
}

/// Threshold, sends and latency for `f = f_lo..=f_hi` at `n = 3f + 1`.
#[wasm_bindgen]
pub fn scalability_sweep(
    f_lo: usize,
    f_hi: usize,
    fanout: usize,
    hmax: u32,
    messages_per_type: usize,
    seed: u64,
) -> Result<String, JsError> {
    sweep_json(f_lo, f_hi, fanout, hmax, messages_per_type, seed).map_err(|e| JsError::new(&e))
}

#[derive(Serialize)]
struct RoundView {
    n: usize,
    f: usize,
    threshold: usize,
    decision: String,
    reason: Option<String>,
    latency_ms: Option<u64>,
    coverage: f64,
    gossip_sends: u64,
    vote_sends: u64,
    trace: Vec<TraceRecord>,
}

pub fn simulate_round_json(config_text: &str, attack: &str) -> Result<String, String> {
    let mut cfg: RunConfig = config_text.parse().map_err(|e| format!("{e}"))?;
    cfg.workload = WorkloadSpec {
        proposer: cfg.workload.proposer,
        ..WorkloadSpec::per_type(0)
    };
    cfg.workload.patient_data = 1;
    let mut plan = AttackPlan::default();
    if !attack.trim().is_empty() {
        match attack.trim().parse().map_err(|e| format!("{e}"))? {
            Attack::InvalidSignature => plan.invalid_signature = 1,
            Attack::ExpiredTimestamp => plan.expired_timestamp = 1,
            Attack::MalformedContent => plan.malformed_content = 1,
        }
    }
    let seed = cfg.validate(plan).map_err(|e| e.to_string())?;
    let (m, trace) = run_experiment_traced(&cfg.network, &cfg.workload_with(plan), seed)
        .map_err(|e| e.to_string())?;
    let rec = &m.messages[0];
    let view = RoundView {
        n: m.n,
        f: m.f,
        threshold: m.threshold,
        decision: format!("{:?}", rec.decision),
        reason: rec.reason.map(|r| format!("{r:?}")),
        latency_ms: rec.latency_ms,
        coverage: rec.coverage,
        gossip_sends: rec.gossip_sends,
        vote_sends: rec.vote_sends,
        trace,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize)]
struct CoveragePoint {
    hmax: u32,
    expected: f64,
    measured: f64,
    full_fraction: f64,
}

pub fn coverage_curve_json(
    n: usize,
    fanout: usize,
    max_hmax: u32,
    messages: usize,
    seed: u64,
) -> Result<String, String> {
    if !(1..=16).contains(&max_hmax) {
        return Err("max_hmax must be in 1..=16".into());
    }
    if messages == 0 || messages > 400 {
        return Err("messages must be in 1..=400".into());
    }
    let mut points = Vec::new();
    for h in 1..=max_hmax {
        let mut net = NetworkSpec::new(n, (n.max(1) - 1) / 3);
        net.gossip = GossipConfig::new(fanout, h).map_err(|e| e.to_string())?;
        let workload = WorkloadSpec {
            patient_data: messages,
            ..WorkloadSpec::per_type(0)
        };
        let m = run_experiment(&net, &workload, seed).map_err(|e| e.to_string())?;
        // Copies are processed at hops 0..h, so the ideal tree has depth h - 1.
        let k = u32::try_from(fanout.min(n.saturating_sub(1))).unwrap_or(u32::MAX);
        let ideal = expected_coverage(k, h - 1).min(n as f64) / n as f64;
        points.push(CoveragePoint {
            hmax: h,
            expected: ideal,
            measured: m.coverage.mean.unwrap_or(0.0),
            full_fraction: m.coverage.full_coverage as f64 / m.coverage.proposals.max(1) as f64,
        });
    }
    Ok(serde_json::to_string(&points).expect("points serialize"))
}

pub fn sweep_json(
    f_lo: usize,
    f_hi: usize,
    fanout: usize,
    hmax: u32,
    messages_per_type: usize,
    seed: u64,
) -> Result<String, String> {
    if f_lo == 0 || f_lo > f_hi || f_hi > 10 {
        return Err("need 1 <= f_lo <= f_hi <= 10".into());
    }
    if messages_per_type > 50 {
        return Err("messages_per_type must be at most 50".into());
    }
    let mut base = NetworkSpec::new(4, 1);
    base.gossip = GossipConfig::new(fanout, hmax).map_err(|e| e.to_string())?;
    let f_values: Vec<usize> = (f_lo..=f_hi).collect();
    let points = run_scalability_sweep(
        &f_values,
        &base,
        &WorkloadSpec::per_type(messages_per_type),
        seed,
        1,
    )
    .map_err(|e| e.to_string())?;
    let rows: Vec<BTreeMap<&str, serde_json::Value>> = points
        .iter()
        .map(|p| {
            let m = &p.metrics;
            BTreeMap::from([
                ("n", p.n.into()),
                ("f", p.f.into()),
                ("threshold", p.threshold.into()),
                ("gossip_sends_mean", m.sends.gossip_mean.into()),
                ("vote_sends_mean", m.sends.vote_mean.into()),
                ("latency_mean_ms", m.latency.mean_ms.into()),
                ("coverage_mean", m.coverage.mean.into()),
                ("accepted", m.table1_total.accepted.into()),
                ("total", m.table1_total.total.into()),
            ])
        })
        .collect();
    Ok(serde_json::to_string(&rows).expect("rows serialize"))
}
