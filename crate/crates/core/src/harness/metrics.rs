//! Experiment aggregates and their JSON/CSV renderings.
//!
//! Everything is stored in vectors or ordered maps so serialization is
//! byte-stable across runs.

use serde::{Deserialize, Serialize};

use crate::consensus::{Decision, DecisionReason};
use crate::message::MessageType;
use crate::simnet::Attack;

/// One row of the per-type acceptance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub message_type: String,
    pub total: usize,
    pub accepted: usize,
    /// `accepted / total`; `None` when `total == 0`.
    pub accuracy: Option<f64>,
}

impl TypeRow {
    pub fn new(label: &str, total: usize, accepted: usize) -> Self {
        TypeRow {
            message_type: label.to_string(),
            total,
            accepted,
            accuracy: ratio(accepted, total),
        }
    }
}

/// One row of the fault-detection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack_type: String,
    pub injected: usize,
    pub rejected: usize,
    pub detection_rate: Option<f64>,
    /// Every validator verdict on these messages named the targeted stage.
    pub isolated_stage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: Option<f64>,
    /// Population standard deviation.
    pub std_ms: Option<f64>,
    pub p50_ms: Option<u64>,
    pub p95_ms: Option<u64>,
    pub min_ms: Option<u64>,
    pub max_ms: Option<u64>,
}

impl LatencySummary {
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let count = sorted.len();
        let (mean, std) = if count == 0 {
            (None, None)
        } else {
            let n = count as f64;
            let mean = sorted.iter().map(|v| *v as f64).sum::<f64>() / n;
            let var = sorted
                .iter()
                .map(|v| (*v as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
            (Some(mean), Some(var.sqrt()))
        };
        LatencySummary {
            count,
            mean_ms: mean,
            std_ms: std,
            p50_ms: percentile_nearest_rank(&sorted, 50),
            p95_ms: percentile_nearest_rank(&sorted, 95),
            min_ms: sorted.first().copied(),
            max_ms: sorted.last().copied(),
        }
    }
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 * len)`.
pub fn percentile_nearest_rank(sorted: &[u64], percentile: u32) -> Option<u64> {
    if sorted.is_empty() || !(1..=100).contains(&percentile) {
        return None;
    }
    let rank = (percentile as usize * sorted.len()).div_ceil(100);
    sorted.get(rank.saturating_sub(1)).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    /// Over proposals that entered the network.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub full_coverage: usize,
    pub proposals: usize,
    pub max_processed_hop: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendSummary {
    pub gossip_mean: Option<f64>,
    pub gossip_max: u64,
    pub vote_mean: Option<f64>,
}

/// Outcome of one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub id: String,
    pub msg_type: MessageType,
    pub proposer: String,
    pub attack: Option<Attack>,
    pub refused: bool,
    pub decision: Decision,
    pub reason: Option<DecisionReason>,
    pub accept_votes: usize,
    pub reject_votes: usize,
    pub honest_accepts_at_decision: usize,
    pub latency_ms: Option<u64>,
    pub coverage: f64,
    pub gossip_sends: u64,
    pub vote_sends: u64,
    pub max_processed_hop: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub n: usize,
    pub f: usize,
    pub threshold: usize,
    pub seed: u64,
    pub table1: Vec<TypeRow>,
    pub table1_total: TypeRow,
    pub table2: Vec<AttackRow>,
    pub table2_total: AttackRow,
    pub coverage: CoverageSummary,
    /// Proposal-to-decision time of accepted rounds, virtual ms.
    pub latency: LatencySummary,
    pub sends: SendSummary,
    pub quorum_safety_violations: usize,
    pub duplicate_votes: u64,
    pub events_executed: u64,
    pub final_clock_ms: u64,
    pub messages: Vec<MessageRecord>,
}

impl ExperimentMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Message Type, Total, Accepted, Accuracy.
    pub fn table1_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["Message Type", "Total", "Accepted", "Accuracy"])
            .expect("in-memory write");
        for row in self
            .table1
            .iter()
            .chain(std::iter::once(&self.table1_total))
        {
            w.write_record([
                row.message_type.clone(),
                row.total.to_string(),
                row.accepted.to_string(),
                percent(row.accuracy),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    /// Attack Type, Injected, Rejected, Detection Rate.
    pub fn table2_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["Attack Type", "Injected", "Rejected", "Detection Rate"])
            .expect("in-memory write");
        for row in self
            .table2
            .iter()
            .chain(std::iter::once(&self.table2_total))
        {
            w.write_record([
                row.attack_type.clone(),
                row.injected.to_string(),
                row.rejected.to_string(),
                percent(row.detection_rate),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    pub fn render_table1(&self) -> String {
        let mut out = format!(
            "{:<18}{:>7}{:>10}{:>10}\n",
            "Message Type", "Total", "Accepted", "Accuracy"
        );
        for row in self
            .table1
            .iter()
            .chain(std::iter::once(&self.table1_total))
        {
            out.push_str(&format!(
                "{:<18}{:>7}{:>10}{:>10}\n",
                row.message_type,
                row.total,
                row.accepted,
                percent(row.accuracy)
            ));
        }
        out
    }

    pub fn render_table2(&self) -> String {
        let mut out = format!(
            "{:<20}{:>10}{:>16}\n",
            "Attack Type", "Injected", "Rejected"
        );
        for row in self
            .table2
            .iter()
            .chain(std::iter::once(&self.table2_total))
        {
            let rejected = format!("{} ({})", row.rejected, percent(row.detection_rate));
            out.push_str(&format!(
                "{:<20}{:>10}{:>16}\n",
                row.attack_type, row.injected, rejected
            ));
        }
        out
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `100%`, `96.5%`, or `n/a`.
pub fn percent(value: Option<f64>) -> String {
    match value {
        Some(v) => {
            let p = v * 100.0;
            if (p - p.round()).abs() < 1e-9 {
                format!("{}%", p.round() as i64)
            } else {
                format!("{p:.1}%")
            }
        }
        None => "n/a".to_string(),
    }
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}
