use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::Vote;
use crate::error::ConfigError;
use crate::gossip::SeenSet;
use crate::message::ValidationVerdict;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    /// `agent-1`, `agent-2`, ... for a 0-based index.
    pub fn numbered(index: usize) -> Self {
        AgentId(format!("agent-{}", index + 1))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for AgentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Specialization {
    Diagnosis,
    Treatment,
    Emergency,
    Analysis,
}

impl Specialization {
    pub const ALL: [Specialization; 4] = [
        Specialization::Diagnosis,
        Specialization::Treatment,
        Specialization::Emergency,
        Specialization::Analysis,
    ];

    /// Round-robin assignment by agent index.
    pub fn for_index(index: usize) -> Self {
        Self::ALL[index % Self::ALL.len()]
    }
}

/// How an agent misbehaves for a whole run.
///
/// The three payload corruptions only affect the agent's own proposals; its
/// votes stay honest. `VoteFlipper` inverts every vote and `Silent` never
/// votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ByzantineProfile {
    #[default]
    Honest,
    BadSigner,
    StaleStamper,
    Malformer,
    VoteFlipper,
    Silent,
}

impl ByzantineProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            ByzantineProfile::Honest => "HONEST",
            ByzantineProfile::BadSigner => "BAD_SIGNER",
            ByzantineProfile::StaleStamper => "STALE_STAMPER",
            ByzantineProfile::Malformer => "MALFORMER",
            ByzantineProfile::VoteFlipper => "VOTE_FLIPPER",
            ByzantineProfile::Silent => "SILENT",
        }
    }

    pub fn is_honest(self) -> bool {
        self == ByzantineProfile::Honest
    }

    /// The vote this agent sends given its own validation verdict.
    pub fn vote(self, verdict: ValidationVerdict) -> Option<Vote> {
        let honest = Vote::from_accepted(verdict.accepted());
        match self {
            ByzantineProfile::Silent => None,
            ByzantineProfile::VoteFlipper => Some(honest.flipped()),
            _ => Some(honest),
        }
    }
}

impl fmt::Display for ByzantineProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ByzantineProfile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ByzantineProfile::*;
        [
            Honest,
            BadSigner,
            StaleStamper,
            Malformer,
            VoteFlipper,
            Silent,
        ]
        .into_iter()
        .find(|p| p.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| ConfigError::invalid("byzantine", format!("unknown profile {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub message_id: String,
    pub accepted_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub specialization: Specialization,
    /// Sorted, never contains `id`.
    pub peers: BTreeSet<AgentId>,
    pub seen: SeenSet,
    /// Accepted messages this agent proposed, in decision order.
    pub history: Vec<HistoryEntry>,
    pub profile: ByzantineProfile,
}

impl AgentState {
    pub fn new(id: AgentId, specialization: Specialization, profile: ByzantineProfile) -> Self {
        AgentState {
            id,
            specialization,
            peers: BTreeSet::new(),
            seen: SeenSet::new(),
            history: Vec::new(),
            profile,
        }
    }
}
