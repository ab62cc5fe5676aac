//! Per-message quorum voting.
//!
//! A round collects at most one vote per agent. It is accepted as soon as
//! `2f + 1` ACCEPT votes are recorded, rejected once all `n` agents have voted
//! without reaching that count, and rejected on timeout otherwise. Decisions
//! are final: votes that arrive later are kept for metrics only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Vote {
    Accept,
    Reject,
}

impl Vote {
    pub fn from_accepted(accepted: bool) -> Self {
        if accepted {
            Vote::Accept
        } else {
            Vote::Reject
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Vote::Accept => Vote::Reject,
            Vote::Reject => Vote::Accept,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Pending,
    Accepted,
    Rejected,
}

/// Why a round left `Pending`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionReason {
    Quorum,
    AllVotedWithoutQuorum,
    Timeout,
}

/// `n` agents tolerating `f` Byzantine ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuorumConfig {
    n: usize,
    f: usize,
    vote_timeout_ms: u64,
}

impl QuorumConfig {
    pub fn new(n: usize, f: usize, vote_timeout_ms: u64) -> Result<Self, ConfigError> {
        let required = 3 * f + 1;
        if n < required {
            return Err(ConfigError::QuorumBound { n, f, required });
        }
        if vote_timeout_ms == 0 {
            return Err(ConfigError::invalid(
                "vote_timeout_ms",
                "must be a positive number of milliseconds",
            ));
        }
        Ok(QuorumConfig {
            n,
            f,
            vote_timeout_ms,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn vote_timeout_ms(&self) -> u64 {
        self.vote_timeout_ms
    }

    /// ACCEPT votes needed: `2f + 1`.
    pub fn threshold(&self) -> usize {
        quorum_threshold(self.f)
    }
}

pub fn quorum_threshold(f: usize) -> usize {
    2 * f + 1
}

/// What [`ConsensusRound::record_vote`] did with a vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteOutcome {
    Counted,
    /// Recorded after the decision; cannot change it.
    Late,
    /// A second vote from the same agent; ignored.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusRound {
    pub message_id: String,
    pub proposer: String,
    /// First vote per agent, including late ones.
    pub votes: BTreeMap<String, Vote>,
    pub decision: Decision,
    pub reason: Option<DecisionReason>,
    pub proposed_at_ms: u64,
    pub decided_at_ms: Option<u64>,
    /// Voters whose (first) vote arrived after the decision.
    pub late_voters: Vec<String>,
    /// Count of repeated votes from agents already recorded.
    pub duplicate_votes: u32,
    /// ACCEPT voters at the moment the round was decided.
    pub accepters_at_decision: Vec<String>,
}

impl ConsensusRound {
    pub fn new(message_id: impl Into<String>, proposer: impl Into<String>, now_ms: u64) -> Self {
        ConsensusRound {
            message_id: message_id.into(),
            proposer: proposer.into(),
            votes: BTreeMap::new(),
            decision: Decision::Pending,
            reason: None,
            proposed_at_ms: now_ms,
            decided_at_ms: None,
            late_voters: Vec::new(),
            duplicate_votes: 0,
            accepters_at_decision: Vec::new(),
        }
    }

    pub fn accept_count(&self) -> usize {
        self.votes.values().filter(|v| **v == Vote::Accept).count()
    }

    pub fn reject_count(&self) -> usize {
        self.votes.values().filter(|v| **v == Vote::Reject).count()
    }

    pub fn is_decided(&self) -> bool {
        self.decision != Decision::Pending
    }

    /// Latency from proposal to decision.
    pub fn latency_ms(&self) -> Option<u64> {
        self.decided_at_ms.map(|t| t - self.proposed_at_ms)
    }

    pub fn record_vote(
        &mut self,
        voter: &str,
        vote: Vote,
        config: &QuorumConfig,
        now_ms: u64,
    ) -> VoteOutcome {
        if self.votes.contains_key(voter) {
            self.duplicate_votes += 1;
            return VoteOutcome::Duplicate;
        }
        self.votes.insert(voter.to_string(), vote);
        if self.is_decided() {
            self.late_voters.push(voter.to_string());
            return VoteOutcome::Late;
        }

        if self.accept_count() >= config.threshold() {
            self.decide(Decision::Accepted, DecisionReason::Quorum, now_ms);
        } else if self.votes.len() >= config.n() {
            self.decide(
                Decision::Rejected,
                DecisionReason::AllVotedWithoutQuorum,
                now_ms,
            );
        }
        VoteOutcome::Counted
    }

    /// Rejects a still-pending round once its timeout has passed. Decided
    /// rounds, and calls before the deadline, are left untouched.
    pub fn expire(&mut self, config: &QuorumConfig, now_ms: u64) -> Decision {
        let deadline = self.proposed_at_ms + config.vote_timeout_ms();
        if !self.is_decided() && now_ms >= deadline {
            self.decide(Decision::Rejected, DecisionReason::Timeout, now_ms);
        }
        self.decision
    }

    fn decide(&mut self, decision: Decision, reason: DecisionReason, now_ms: u64) {
        debug_assert!(now_ms >= self.proposed_at_ms);
        self.decision = decision;
        self.reason = Some(reason);
        self.decided_at_ms = Some(now_ms);
        self.accepters_at_decision = self
            .votes
            .iter()
            .filter(|(_, v)| **v == Vote::Accept)
            .map(|(id, _)| id.clone())
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n: usize, f: usize) -> QuorumConfig {
        QuorumConfig::new(n, f, 100).unwrap()
    }

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("agent-{i}")).collect()
    }

    #[test]
    fn thresholds() {
        assert_eq!(cfg(4, 1).threshold(), 3);
        assert_eq!(cfg(1, 0).threshold(), 1);
        assert_eq!(cfg(31, 10).threshold(), 21);
        for f in 0..20 {
            assert_eq!(quorum_threshold(f), f + f + 1);
            assert!(quorum_threshold(f) <= 3 * f + 1);
        }
    }

    #[test]
    fn bound_is_enforced() {
        assert_eq!(
            QuorumConfig::new(4, 2, 100),
            Err(ConfigError::QuorumBound {
                n: 4,
                f: 2,
                required: 7
            })
        );
        assert!(QuorumConfig::new(4, 1, 0).is_err());
        assert!(QuorumConfig::new(5, 1, 1).is_ok());
    }

    #[test]
    fn accepted_at_third_accept() {
        let c = cfg(4, 1);
        let a = ids(4);
        let mut r = ConsensusRound::new("m", &a[0], 0);
        r.record_vote(&a[0], Vote::Accept, &c, 0);
        r.record_vote(&a[1], Vote::Accept, &c, 10);
        assert_eq!(r.decision, Decision::Pending);
        r.record_vote(&a[2], Vote::Accept, &c, 20);
        assert_eq!(r.decision, Decision::Accepted);
        assert_eq!(r.decided_at_ms, Some(20));
        assert_eq!(r.reason, Some(DecisionReason::Quorum));
        assert_eq!(
            r.record_vote(&a[3], Vote::Reject, &c, 30),
            VoteOutcome::Late
        );
        assert_eq!(r.decision, Decision::Accepted);
        assert_eq!(r.votes.len(), 4);
    }

    #[test]
    fn rejected_when_all_voted() {
        let c = cfg(4, 1);
        let a = ids(4);
        let mut r = ConsensusRound::new("m", &a[0], 0);
        for (voter, vote) in a
            .iter()
            .zip([Vote::Accept, Vote::Accept, Vote::Reject, Vote::Reject])
        {
            r.record_vote(voter, vote, &c, 5);
        }
        assert_eq!(r.decision, Decision::Rejected);
        assert_eq!(r.reason, Some(DecisionReason::AllVotedWithoutQuorum));

        let mut all_reject = ConsensusRound::new("m", &a[0], 0);
        for voter in &a {
            all_reject.record_vote(voter, Vote::Reject, &c, 5);
        }
        assert_eq!(all_reject.decision, Decision::Rejected);
        assert_eq!(all_reject.accept_count(), 0);
    }

    #[test]
    fn first_vote_wins() {
        let c = cfg(4, 1);
        let mut r = ConsensusRound::new("m", "agent-1", 0);
        r.record_vote("agent-2", Vote::Reject, &c, 1);
        assert_eq!(
            r.record_vote("agent-2", Vote::Accept, &c, 2),
            VoteOutcome::Duplicate
        );
        assert_eq!(r.votes["agent-2"], Vote::Reject);
        assert_eq!(r.duplicate_votes, 1);
    }

    #[test]
    fn expiry() {
        let c = cfg(4, 1);
        let mut two = ConsensusRound::new("m", "agent-1", 0);
        two.record_vote("agent-1", Vote::Accept, &c, 0);
        two.record_vote("agent-2", Vote::Accept, &c, 0);
        assert_eq!(two.expire(&c, 99), Decision::Pending);
        assert_eq!(two.expire(&c, 100), Decision::Rejected);
        assert_eq!(two.reason, Some(DecisionReason::Timeout));
        assert_eq!(two.decided_at_ms, Some(100));

        let mut none = ConsensusRound::new("m", "agent-1", 0);
        assert_eq!(none.expire(&c, 500), Decision::Rejected);

        let mut three = ConsensusRound::new("m", "agent-1", 0);
        for v in ["agent-1", "agent-2", "agent-3"] {
            three.record_vote(v, Vote::Accept, &c, 7);
        }
        assert_eq!(three.expire(&c, 500), Decision::Accepted);
        assert_eq!(three.decided_at_ms, Some(7));
    }

    /// Every agent (honest or not) votes; flippers invert their validation
    /// result. Exhaustive over flipper placements.
    fn decide_with_flippers(n: usize, f: usize, flippers: &[usize]) -> Decision {
        let c = cfg(n, f);
        let a = ids(n);
        let mut r = ConsensusRound::new("m", &a[0], 0);
        for (i, voter) in a.iter().enumerate() {
            let honest_vote = Vote::Accept;
            let vote = if flippers.contains(&i) {
                honest_vote.flipped()
            } else {
                honest_vote
            };
            r.record_vote(voter, vote, &c, i as u64);
        }
        r.decision
    }

    fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == size)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
            .collect()
    }

    #[test]
    fn flip_resistance_boundary() {
        for f in [1usize, 2] {
            let n = 3 * f + 1;
            for placement in subsets(n, f) {
                assert_eq!(decide_with_flippers(n, f, &placement), Decision::Accepted);
            }
            for placement in subsets(n, f + 1) {
                assert_eq!(decide_with_flippers(n, f, &placement), Decision::Rejected);
            }
        }
    }

    #[test]
    fn agreement_on_validity() {
        for (n, f) in [(4, 1), (7, 2), (10, 3)] {
            assert_eq!(decide_with_flippers(n, f, &[]), Decision::Accepted);
        }
    }

    #[derive(Debug, Clone)]
    enum Step {
        Vote(usize, bool),
        Tick(u64),
    }

    fn step() -> impl Strategy<Value = Step> {
        prop_oneof![
            (0usize..7, any::<bool>()).prop_map(|(i, a)| Step::Vote(i, a)),
            (0u64..150).prop_map(Step::Tick),
        ]
    }

    proptest! {
        #[test]
        fn decisions_are_monotone(steps in prop::collection::vec(step(), 0..40)) {
            let c = QuorumConfig::new(7, 2, 100).unwrap();
            let mut r = ConsensusRound::new("m", "agent-0", 0);
            let mut now = 0;
            let mut first: Option<(Decision, Option<u64>)> = None;
            for s in steps {
                match s {
                    Step::Vote(i, a) => {
                        r.record_vote(&format!("agent-{i}"), Vote::from_accepted(a), &c, now);
                    }
                    Step::Tick(dt) => {
                        now += dt;
                        r.expire(&c, now);
                    }
                }
                if let Some(d) = first {
                    prop_assert_eq!(d, (r.decision, r.decided_at_ms));
                } else if r.is_decided() {
                    first = Some((r.decision, r.decided_at_ms));
                    prop_assert!(r.decided_at_ms.unwrap() >= r.proposed_at_ms);
                    if r.decision == Decision::Accepted {
                        prop_assert!(r.accepters_at_decision.len() >= c.threshold());
                    }
                }
                let distinct: std::collections::BTreeSet<_> = r.votes.keys().collect();
                prop_assert_eq!(distinct.len(), r.votes.len());
            }
        }
    }
}
