use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{
    ratio, AttackRow, CoverageSummary, ExperimentMetrics, LatencySummary, MessageRecord,
    SendSummary, TypeRow,
};
use super::workload::{generate_workload, WorkloadItem, WorkloadSpec};
use crate::consensus::{Decision, QuorumConfig};
use crate::error::{ConfigError, SimError};
use crate::gossip::GossipConfig;
use crate::message::{MessageType, ValidationConfig, VerdictReason};
use crate::simnet::{
    AgentId, Attack, ByzantineProfile, DelayModel, NetworkConfig, Proposal, SimNetwork,
    TraceRecord, DEFAULT_MAX_EVENTS,
};

/// Everything needed to build a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub f: usize,
    pub gossip: GossipConfig,
    pub validation: ValidationConfig,
    pub delay: DelayModel,
    /// `None` selects `20 x` the delay model's maximum.
    pub vote_timeout_ms: Option<u64>,
    pub max_events: u64,
    pub trace: bool,
    /// Behaviour overrides by 0-based agent index; unlisted agents are honest.
    pub byzantine: BTreeMap<usize, ByzantineProfile>,
}

impl NetworkSpec {
    pub fn new(n: usize, f: usize) -> Self {
        NetworkSpec {
            n,
            f,
            gossip: GossipConfig::default(),
            validation: ValidationConfig::default(),
            delay: DelayModel::default(),
            vote_timeout_ms: None,
            max_events: DEFAULT_MAX_EVENTS,
            trace: false,
            byzantine: BTreeMap::new(),
        }
    }

    /// The same network resized to `n = 3f + 1`.
    pub fn with_f(&self, f: usize) -> Self {
        NetworkSpec {
            n: 3 * f + 1,
            f,
            ..self.clone()
        }
    }

    pub fn network_config(&self) -> Result<NetworkConfig, ConfigError> {
        let timeout = self
            .vote_timeout_ms
            .unwrap_or_else(|| self.delay.default_vote_timeout_ms());
        let quorum = QuorumConfig::new(self.n, self.f, timeout)?;
        if self.max_events == 0 {
            return Err(ConfigError::invalid("max_events", "must be positive"));
        }
        if self.validation.max_age_ms == 0 {
            return Err(ConfigError::invalid("max_age_ms", "must be positive"));
        }
        Ok(NetworkConfig {
            quorum,
            gossip: self.gossip,
            validation: self.validation,
            delay: self.delay,
            max_events: self.max_events,
            trace: self.trace,
        })
    }

    pub fn profiles(&self) -> Result<Vec<ByzantineProfile>, ConfigError> {
        if let Some((&i, _)) = self.byzantine.range(self.n..).next() {
            return Err(ConfigError::invalid(
                "byzantine",
                format!("agent-{} does not exist for n = {}", i + 1, self.n),
            ));
        }
        Ok((0..self.n)
            .map(|i| self.byzantine.get(&i).copied().unwrap_or_default())
            .collect())
    }

    pub fn byzantine_count(&self) -> usize {
        self.byzantine.values().filter(|p| !p.is_honest()).count()
    }
}

/// Builds the network and schedules every workload proposal without running
/// anything. The workload draws from stream 1 of the seed, the network from
/// stream 0.
pub fn prepare_experiment(
    net: &NetworkSpec,
    workload: &WorkloadSpec,
    seed: u64,
) -> Result<(SimNetwork, Vec<WorkloadItem>), SimError> {
    let config = net.network_config()?;
    let profiles = net.profiles()?;
    workload.validate(net.n, net.validation.max_age_ms)?;

    let agents: Vec<AgentId> = (0..net.n).map(AgentId::numbered).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let items = generate_workload(workload, &agents, &mut rng)?;

    let mut network = SimNetwork::new(config, &profiles, seed)?;
    for item in &items {
        network.schedule_proposal(
            item.propose_at_ms,
            Proposal {
                message: item.message.clone(),
                proposer: item.proposer.clone(),
                attack: item.attack,
            },
        )?;
    }
    Ok((network, items))
}

pub fn run_experiment(
    net: &NetworkSpec,
    workload: &WorkloadSpec,
    seed: u64,
) -> Result<ExperimentMetrics, SimError> {
    let (mut network, items) = prepare_experiment(net, workload, seed)?;
    network.run()?;
    collect_metrics(&network, &items, net, seed)
}

/// [`run_experiment`] with tracing forced on.
pub fn run_experiment_traced(
    net: &NetworkSpec,
    workload: &WorkloadSpec,
    seed: u64,
) -> Result<(ExperimentMetrics, Vec<TraceRecord>), SimError> {
    let traced = NetworkSpec {
        trace: true,
        ..net.clone()
    };
    let (mut network, items) = prepare_experiment(&traced, workload, seed)?;
    network.run()?;
    let metrics = collect_metrics(&network, &items, net, seed)?;
    Ok((metrics, network.trace().to_vec()))
}

fn targeted_reason(attack: Attack) -> VerdictReason {
    match attack {
        Attack::InvalidSignature => VerdictReason::BadSignature,
        Attack::ExpiredTimestamp => VerdictReason::StaleTimestamp,
        Attack::MalformedContent => VerdictReason::MalformedContent,
    }
}

/// Aggregates a finished run. Fails with [`SimError::QuorumSafety`] when an
/// accepted round lacks `f + 1` honest ACCEPT votes while at most `f` agents
/// are labelled Byzantine.
pub fn collect_metrics(
    network: &SimNetwork,
    items: &[WorkloadItem],
    net: &NetworkSpec,
    seed: u64,
) -> Result<ExperimentMetrics, SimError> {
    let quorum = network.config().quorum;
    let f = quorum.f();
    let honest = |id: &str| {
        network
            .agent(&AgentId::new(id))
            .is_some_and(|a| a.profile.is_honest())
    };

    let mut records = Vec::with_capacity(items.len());
    let mut violations = Vec::new();
    let mut duplicate_votes = 0u64;
    for item in items {
        let id = &item.message.id;
        let stats = network.stats().get(id).cloned().unwrap_or_default();
        let round = network.round(id);
        let decision = round.map_or(Decision::Pending, |r| r.decision);
        let honest_accepts = round.map_or(0, |r| {
            r.accepters_at_decision.iter().filter(|v| honest(v)).count()
        });
        if decision == Decision::Accepted && honest_accepts < f + 1 {
            violations.push((id.clone(), honest_accepts));
        }
        duplicate_votes += round.map_or(0, |r| u64::from(r.duplicate_votes));
        records.push(MessageRecord {
            id: id.clone(),
            msg_type: item.message.msg_type,
            proposer: item.proposer.to_string(),
            attack: stats.attack,
            refused: stats.refused,
            decision,
            reason: round.and_then(|r| r.reason),
            accept_votes: round.map_or(0, |r| r.accept_count()),
            reject_votes: round.map_or(0, |r| r.reject_count()),
            honest_accepts_at_decision: honest_accepts,
            latency_ms: round.and_then(|r| r.latency_ms()),
            coverage: network.coverage(id),
            gossip_sends: stats.gossip_sends,
            vote_sends: stats.vote_sends,
            max_processed_hop: stats.processed_at_hop.values().max().copied(),
        });
    }

    if let Some((message_id, honest_accepts)) = violations.first() {
        if net.byzantine_count() <= f {
            return Err(SimError::QuorumSafety {
                message_id: message_id.clone(),
                honest_accepts: *honest_accepts,
                required: f + 1,
            });
        }
    }

    let table1: Vec<TypeRow> = MessageType::ALL
        .iter()
        .map(|t| {
            let clean = records
                .iter()
                .filter(|r| r.msg_type == *t && r.attack.is_none());
            let total = clean.clone().count();
            let accepted = clean.filter(|r| r.decision == Decision::Accepted).count();
            TypeRow::new(t.label(), total, accepted)
        })
        .collect();
    let table1_total = TypeRow::new(
        "Total",
        table1.iter().map(|r| r.total).sum(),
        table1.iter().map(|r| r.accepted).sum(),
    );

    let table2: Vec<AttackRow> = Attack::ALL
        .iter()
        .map(|a| {
            let hit: Vec<&MessageRecord> =
                records.iter().filter(|r| r.attack == Some(*a)).collect();
            let rejected = hit
                .iter()
                .filter(|r| r.refused || r.decision == Decision::Rejected)
                .count();
            let target = targeted_reason(*a);
            let isolated_stage = hit.iter().all(|r| {
                network.stats()[&r.id]
                    .verdicts
                    .keys()
                    .all(|reason| *reason == target)
            });
            AttackRow {
                attack_type: a.label().to_string(),
                injected: hit.len(),
                rejected,
                detection_rate: ratio(rejected, hit.len()),
                isolated_stage,
            }
        })
        .collect();
    let injected: usize = table2.iter().map(|r| r.injected).sum();
    let rejected: usize = table2.iter().map(|r| r.rejected).sum();
    let table2_total = AttackRow {
        attack_type: "Total".to_string(),
        injected,
        rejected,
        detection_rate: ratio(rejected, injected),
        isolated_stage: table2.iter().all(|r| r.isolated_stage),
    };

    let entered: Vec<&MessageRecord> = records.iter().filter(|r| !r.refused).collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    let coverage = CoverageSummary {
        mean: mean(&mut entered.iter().map(|r| r.coverage)),
        min: entered.iter().map(|r| r.coverage).reduce(f64::min),
        full_coverage: entered.iter().filter(|r| r.coverage >= 1.0).count(),
        proposals: entered.len(),
        max_processed_hop: entered
            .iter()
            .filter_map(|r| r.max_processed_hop)
            .max()
            .unwrap_or(0),
    };
    let sends = SendSummary {
        gossip_mean: mean(&mut entered.iter().map(|r| r.gossip_sends as f64)),
        gossip_max: entered.iter().map(|r| r.gossip_sends).max().unwrap_or(0),
        vote_mean: mean(&mut entered.iter().map(|r| r.vote_sends as f64)),
    };
    let latencies: Vec<u64> = records
        .iter()
        .filter(|r| r.decision == Decision::Accepted)
        .filter_map(|r| r.latency_ms)
        .collect();

    Ok(ExperimentMetrics {
        n: quorum.n(),
        f,
        threshold: quorum.threshold(),
        seed,
        table1,
        table1_total,
        table2,
        table2_total,
        coverage,
        latency: LatencySummary::from_samples(&latencies),
        sends,
        quorum_safety_violations: violations.len(),
        duplicate_votes,
        events_executed: network.events_executed(),
        final_clock_ms: network.clock_ms(),
        messages: records,
    })
}
