//! Deterministic discrete-event network.
//!
//! Events are ordered by `(virtual time, insertion sequence)`, so a run is a
//! pure function of its configuration and seed. All randomness (link delays,
//! gossip sampling, corruption choices) comes from one ChaCha stream drawn in
//! event order. Message validation costs no virtual time.

mod agent;
mod byzantine;
mod delay;
mod trace;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use agent::{AgentId, AgentState, ByzantineProfile, HistoryEntry, Specialization};
pub use byzantine::{apply_byzantine_corruption, Attack};
pub use delay::DelayModel;
pub use trace::TraceRecord;

use crate::consensus::{ConsensusRound, Decision, QuorumConfig, Vote, VoteOutcome};
use crate::error::{ConfigError, SimError};
use crate::gossip::{self, DropReason, GossipAction, GossipConfig};
use crate::message::{
    validate_message, verify_signature, MedicalMessage, ValidationConfig, VerdictReason,
};

pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub quorum: QuorumConfig,
    pub gossip: GossipConfig,
    pub validation: ValidationConfig,
    pub delay: DelayModel,
    /// Abort once this many events have executed without quiescing.
    pub max_events: u64,
    pub trace: bool,
}

impl NetworkConfig {
    /// Defaults for everything but the quorum: fanout 2, three hops, a
    /// 300 s freshness window and FIXED(5) links.
    pub fn new(quorum: QuorumConfig) -> Self {
        NetworkConfig {
            quorum,
            gossip: GossipConfig::default(),
            validation: ValidationConfig::default(),
            delay: DelayModel::default(),
            max_events: DEFAULT_MAX_EVENTS,
            trace: false,
        }
    }
}

/// A message entering the network at its proposer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub message: MedicalMessage,
    pub proposer: AgentId,
    /// Per-message fault injection; the proposer takes the Byzantine path
    /// for this message only.
    pub attack: Option<Attack>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Propose(Box<Proposal>),
    Gossip {
        from: AgentId,
        to: AgentId,
        message: MedicalMessage,
    },
    Vote {
        voter: AgentId,
        to: AgentId,
        message_id: String,
        vote: Vote,
    },
    Timeout {
        message_id: String,
    },
}

impl Event {
    fn kind(&self) -> &'static str {
        match self {
            Event::Propose(_) => "propose",
            Event::Gossip { .. } => "gossip_deliver",
            Event::Vote { .. } => "vote_deliver",
            Event::Timeout { .. } => "timeout",
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    at_ms: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at_ms, self.seq) == (other.at_ms, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at_ms, self.seq).cmp(&(other.at_ms, other.seq))
    }
}

/// Per-message counters, keyed by message id in [`SimNetwork::stats`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageStats {
    pub attack: Option<Attack>,
    /// The proposer refused its own message (bad signature, honest path).
    pub refused: bool,
    pub gossip_sends: u64,
    pub vote_sends: u64,
    /// Hop count at which each agent processed the message.
    pub processed_at_hop: BTreeMap<AgentId, u32>,
    /// Local processing events; equals `processed_at_hop.len()` unless an
    /// agent processed twice.
    pub process_events: u64,
    pub duplicate_drops: u64,
    pub hop_limit_drops: u64,
    pub max_delivered_hop: u32,
    /// Validation verdicts computed by every processing agent.
    pub verdicts: BTreeMap<VerdictReason, u32>,
    pub unroutable_votes: u64,
}

pub struct SimNetwork {
    config: NetworkConfig,
    agents: BTreeMap<AgentId, AgentState>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    clock_ms: u64,
    rng: ChaCha8Rng,
    rounds: BTreeMap<String, ConsensusRound>,
    stats: BTreeMap<String, MessageStats>,
    trace: Vec<TraceRecord>,
    events_executed: u64,
}

impl SimNetwork {
    /// `profiles.len()` agents named `agent-1..`, fully connected.
    pub fn new(
        config: NetworkConfig,
        profiles: &[ByzantineProfile],
        seed: u64,
    ) -> Result<Self, SimError> {
        let n = config.quorum.n();
        if profiles.len() != n {
            return Err(ConfigError::invalid(
                "n",
                format!("{} agent profiles given for n = {n}", profiles.len()),
            )
            .into());
        }
        let ids: Vec<AgentId> = (0..n).map(AgentId::numbered).collect();
        let agents = ids
            .iter()
            .zip(profiles)
            .enumerate()
            .map(|(i, (id, profile))| {
                let mut state = AgentState::new(id.clone(), Specialization::for_index(i), *profile);
                state.peers = ids.iter().filter(|p| *p != id).cloned().collect();
                (id.clone(), state)
            })
            .collect();
        Ok(SimNetwork {
            config,
            agents,
            queue: BinaryHeap::new(),
            next_seq: 0,
            clock_ms: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: BTreeMap::new(),
            stats: BTreeMap::new(),
            trace: Vec::new(),
            events_executed: 0,
        })
    }

    /// Replaces an agent's peer set (directed links).
    pub fn set_peers(
        &mut self,
        agent: &AgentId,
        peers: impl IntoIterator<Item = AgentId>,
    ) -> Result<(), SimError> {
        let peers: BTreeSet<AgentId> = peers.into_iter().collect();
        for p in &peers {
            if p == agent {
                return Err(SimError::SelfSend(agent.to_string()));
            }
            if !self.agents.contains_key(p) {
                return Err(SimError::UnknownAgent(p.to_string()));
            }
        }
        self.agent_mut(agent)?.peers = peers;
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.values()
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentState> {
        self.agents.get(id)
    }

    pub fn rounds(&self) -> &BTreeMap<String, ConsensusRound> {
        &self.rounds
    }

    pub fn round(&self, message_id: &str) -> Option<&ConsensusRound> {
        self.rounds.get(message_id)
    }

    pub fn stats(&self) -> &BTreeMap<String, MessageStats> {
        &self.stats
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn events_executed(&self) -> u64 {
        self.events_executed
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn is_fully_connected(&self) -> bool {
        let n = self.agents.len();
        self.agents.values().all(|a| a.peers.len() + 1 == n)
    }

    /// Fraction of agents that have seen `message_id`.
    pub fn coverage(&self, message_id: &str) -> f64 {
        if self.agents.is_empty() {
            return 0.0;
        }
        let reached = self
            .agents
            .values()
            .filter(|a| a.seen.contains(message_id))
            .count();
        reached as f64 / self.agents.len() as f64
    }

    /// Enqueues `event` at `clock + delay_ms`. Ties run in scheduling order.
    pub fn schedule(&mut self, delay_ms: u64, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled {
            at_ms: self.clock_ms + delay_ms,
            seq,
            event,
        }));
    }

    /// Schedules a proposal at absolute virtual time `at_ms`.
    pub fn schedule_proposal(&mut self, at_ms: u64, proposal: Proposal) -> Result<(), SimError> {
        if !self.agents.contains_key(&proposal.proposer) {
            return Err(SimError::UnknownAgent(proposal.proposer.to_string()));
        }
        let delay = at_ms.checked_sub(self.clock_ms).ok_or_else(|| {
            ConfigError::invalid("start_ms", format!("proposal at {at_ms} ms is in the past"))
        })?;
        self.schedule(delay, Event::Propose(Box::new(proposal)));
        Ok(())
    }

    /// Runs until the queue is empty.
    pub fn run(&mut self) -> Result<(), SimError> {
        while self.step()? {}
        Ok(())
    }

    /// Executes one event. Returns `false` when the queue was empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(Reverse(next)) = self.queue.pop() else {
            return Ok(false);
        };
        if self.events_executed >= self.config.max_events {
            return Err(SimError::EventCap {
                cap: self.config.max_events,
                clock_ms: self.clock_ms,
            });
        }
        assert!(
            next.at_ms >= self.clock_ms,
            "event at {} ms scheduled behind the clock ({} ms)",
            next.at_ms,
            self.clock_ms
        );
        self.clock_ms = next.at_ms;
        self.events_executed += 1;
        self.dispatch(next.event)?;
        Ok(true)
    }

    fn dispatch(&mut self, event: Event) -> Result<(), SimError> {
        let kind = event.kind();
        match event {
            Event::Propose(p) => {
                self.record(kind, p.proposer.as_str(), &p.message.id, String::new());
                self.on_propose(*p)
            }
            Event::Gossip { from, to, message } => {
                self.record(
                    kind,
                    to.as_str(),
                    &message.id,
                    format!("from={from} hop={}", message.hop_count),
                );
                self.on_gossip(&to, Some(&from), message)
            }
            Event::Vote {
                voter,
                to,
                message_id,
                vote,
            } => {
                self.record(
                    kind,
                    to.as_str(),
                    &message_id,
                    format!("voter={voter} vote={vote:?}"),
                );
                self.on_vote(&voter, &message_id, vote);
                Ok(())
            }
            Event::Timeout { message_id } => {
                let proposer = self
                    .rounds
                    .get(&message_id)
                    .map(|r| r.proposer.clone())
                    .unwrap_or_default();
                self.record(kind, &proposer, &message_id, String::new());
                self.on_timeout(&message_id);
                Ok(())
            }
        }
    }

    fn on_propose(&mut self, proposal: Proposal) -> Result<(), SimError> {
        let Proposal {
            message,
            proposer,
            attack,
        } = proposal;
        if self.rounds.contains_key(&message.id) || self.stats.contains_key(&message.id) {
            return Err(SimError::DuplicateMessageId(message.id));
        }
        let profile = self.agent(&proposer).map(|a| a.profile).unwrap_or_default();
        let corruption = attack.or_else(|| Attack::from_profile(profile));
        self.stats.insert(
            message.id.clone(),
            MessageStats {
                attack: corruption,
                ..MessageStats::default()
            },
        );

        let message = match corruption {
            Some(a) => apply_byzantine_corruption(
                &message,
                a.profile(),
                &mut self.rng,
                self.clock_ms,
                self.config.validation.max_age_ms,
            ),
            None => {
                if !verify_signature(&message) {
                    self.stats_mut(&message.id).refused = true;
                    self.record(
                        "proposal_refused",
                        proposer.as_str(),
                        &message.id,
                        "bad self-signature".into(),
                    );
                    return Ok(());
                }
                message
            }
        };

        self.rounds.insert(
            message.id.clone(),
            ConsensusRound::new(&message.id, proposer.as_str(), self.clock_ms),
        );
        let timeout = self.config.quorum.vote_timeout_ms();
        self.schedule(
            timeout,
            Event::Timeout {
                message_id: message.id.clone(),
            },
        );
        self.on_gossip(&proposer, None, message)
    }

    fn on_gossip(
        &mut self,
        agent: &AgentId,
        from: Option<&AgentId>,
        message: MedicalMessage,
    ) -> Result<(), SimError> {
        let hop = message.hop_count;
        {
            let stats = self.stats_mut(&message.id);
            stats.max_delivered_hop = stats.max_delivered_hop.max(hop);
        }
        let state = self
            .agents
            .get_mut(agent)
            .ok_or_else(|| SimError::UnknownAgent(agent.to_string()))?;
        let peers: Vec<AgentId> = state.peers.iter().cloned().collect();
        let action = gossip::handle_gossip(
            &message,
            &mut state.seen,
            &peers,
            from,
            &self.config.gossip,
            &mut self.rng,
        );
        match action {
            GossipAction::Dropped(reason) => {
                let stats = self.stats_mut(&message.id);
                match reason {
                    DropReason::AlreadySeen => stats.duplicate_drops += 1,
                    DropReason::HopLimit => stats.hop_limit_drops += 1,
                }
                self.record(
                    "gossip_drop",
                    agent.as_str(),
                    &message.id,
                    format!("{reason:?}"),
                );
                Ok(())
            }
            GossipAction::Process { forward_to, copy } => {
                {
                    let stats = self.stats_mut(&message.id);
                    stats.processed_at_hop.insert(agent.clone(), hop);
                    stats.process_events += 1;
                }
                self.process_locally(agent, &message)?;
                for peer in forward_to {
                    self.send_gossip(agent, &peer, copy.clone())?;
                }
                Ok(())
            }
        }
    }

    /// Validate, then vote to the message's sender (or record the self-vote
    /// directly when this agent is the proposer).
    fn process_locally(
        &mut self,
        agent: &AgentId,
        message: &MedicalMessage,
    ) -> Result<(), SimError> {
        let verdict = validate_message(message, self.clock_ms, &self.config.validation);
        *self
            .stats_mut(&message.id)
            .verdicts
            .entry(verdict.reason)
            .or_default() += 1;
        let profile = self.agents[agent].profile;
        let vote = profile.vote(verdict);
        self.record(
            "process",
            agent.as_str(),
            &message.id,
            format!(
                "verdict={:?} vote={}",
                verdict.reason,
                vote.map_or("none".into(), |v| format!("{v:?}"))
            ),
        );
        let Some(vote) = vote else {
            return Ok(());
        };

        let proposer = AgentId::new(message.sender.clone());
        if &proposer == agent {
            self.on_vote(agent, &message.id, vote);
            Ok(())
        } else if self.agents.contains_key(&proposer) {
            self.send_vote(agent, &proposer, &message.id, vote)
        } else {
            self.stats_mut(&message.id).unroutable_votes += 1;
            self.record(
                "vote_unroutable",
                agent.as_str(),
                &message.id,
                format!("sender={proposer}"),
            );
            Ok(())
        }
    }

    fn check_link(&self, from: &AgentId, to: &AgentId) -> Result<&AgentState, SimError> {
        let sender = self
            .agents
            .get(from)
            .ok_or_else(|| SimError::UnknownAgent(from.to_string()))?;
        if !self.agents.contains_key(to) {
            return Err(SimError::UnknownAgent(to.to_string()));
        }
        if from == to {
            return Err(SimError::SelfSend(from.to_string()));
        }
        Ok(sender)
    }

    /// Sends a gossip copy over the `from -> to` link.
    pub fn send_gossip(
        &mut self,
        from: &AgentId,
        to: &AgentId,
        message: MedicalMessage,
    ) -> Result<(), SimError> {
        if !self.check_link(from, to)?.peers.contains(to) {
            return Err(SimError::NotAPeer {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        let delay = self.config.delay.sample(&mut self.rng);
        self.stats_mut(&message.id).gossip_sends += 1;
        self.schedule(
            delay,
            Event::Gossip {
                from: from.clone(),
                to: to.clone(),
                message,
            },
        );
        Ok(())
    }

    /// Unicasts a vote. Direct links take one delay sample; otherwise the
    /// vote follows a shortest path and pays one sample per hop.
    pub fn send_vote(
        &mut self,
        voter: &AgentId,
        to: &AgentId,
        message_id: &str,
        vote: Vote,
    ) -> Result<(), SimError> {
        let direct = self.check_link(voter, to)?.peers.contains(to);
        let hops = if direct {
            Some(1)
        } else {
            self.shortest_path_hops(voter, to)
        };
        let Some(hops) = hops else {
            self.stats_mut(message_id).unroutable_votes += 1;
            self.record(
                "vote_unroutable",
                voter.as_str(),
                message_id,
                format!("to={to}"),
            );
            return Ok(());
        };
        let delay = (0..hops)
            .map(|_| self.config.delay.sample(&mut self.rng))
            .sum();
        self.stats_mut(message_id).vote_sends += 1;
        self.schedule(
            delay,
            Event::Vote {
                voter: voter.clone(),
                to: to.clone(),
                message_id: message_id.to_string(),
                vote,
            },
        );
        Ok(())
    }

    fn shortest_path_hops(&self, from: &AgentId, to: &AgentId) -> Option<usize> {
        let mut dist: BTreeMap<&AgentId, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(from, 0);
        queue.push_back(from);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur];
            if cur == to {
                return Some(d);
            }
            for next in &self.agents[cur].peers {
                if !dist.contains_key(next) {
                    dist.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        None
    }

    fn on_vote(&mut self, voter: &AgentId, message_id: &str, vote: Vote) {
        let now = self.clock_ms;
        let quorum = self.config.quorum;
        let Some(round) = self.rounds.get_mut(message_id) else {
            self.record("vote_orphaned", voter.as_str(), message_id, String::new());
            return;
        };
        let was_decided = round.is_decided();
        let outcome = round.record_vote(voter.as_str(), vote, &quorum, now);
        let proposer = round.proposer.clone();
        if outcome == VoteOutcome::Duplicate {
            self.record(
                "vote_duplicate",
                &proposer,
                message_id,
                format!("voter={voter}"),
            );
        }
        if !was_decided && self.rounds[message_id].is_decided() {
            self.on_decided(message_id);
        }
    }

    fn on_timeout(&mut self, message_id: &str) {
        let now = self.clock_ms;
        let quorum = self.config.quorum;
        if let Some(round) = self.rounds.get_mut(message_id) {
            let was_decided = round.is_decided();
            round.expire(&quorum, now);
            if !was_decided && round.is_decided() {
                self.on_decided(message_id);
            }
        }
    }

    fn on_decided(&mut self, message_id: &str) {
        let round = &self.rounds[message_id];
        let (decision, reason, proposer) = (round.decision, round.reason, round.proposer.clone());
        let detail = format!(
            "decision={decision:?} reason={:?} accept={} reject={}",
            reason.expect("decided rounds carry a reason"),
            round.accept_count(),
            round.reject_count()
        );
        if decision == Decision::Accepted {
            if let Some(agent) = self.agents.get_mut(proposer.as_str()) {
                agent.history.push(HistoryEntry {
                    message_id: message_id.to_string(),
                    accepted_at_ms: self.clock_ms,
                });
            }
        }
        self.record("decision", &proposer, message_id, detail);
    }

    fn agent_mut(&mut self, id: &AgentId) -> Result<&mut AgentState, SimError> {
        self.agents
            .get_mut(id)
            .ok_or_else(|| SimError::UnknownAgent(id.to_string()))
    }

    fn stats_mut(&mut self, message_id: &str) -> &mut MessageStats {
        self.stats.entry(message_id.to_string()).or_default()
    }

    fn record(&mut self, kind: &str, actor: &str, message_id: &str, detail: String) {
        if self.config.trace {
            self.trace.push(TraceRecord {
                time_ms: self.clock_ms,
                kind: kind.to_string(),
                actor: actor.to_string(),
                message_id: message_id.to_string(),
                detail,
            });
        }
    }
}
