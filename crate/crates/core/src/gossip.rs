//! Push gossip with duplicate suppression and a hop limit.
//!
//! An agent drops a copy it has already seen, or one that arrives with
//! `hop_count >= h_max`, before doing anything else. Otherwise it records the
//! id, processes the message locally and forwards a copy with `hop_count + 1`
//! to `min(fanout_cap, candidates)` peers sampled uniformly without
//! replacement. The peer the copy arrived from is not a candidate.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::message::MedicalMessage;
use crate::simnet::{AgentId, SimNetwork};

pub const DEFAULT_FANOUT: usize = 2;
pub const DEFAULT_HOP_LIMIT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GossipConfig {
    fanout_cap: usize,
    h_max: u32,
}

impl GossipConfig {
    pub fn new(fanout_cap: usize, h_max: u32) -> Result<Self, ConfigError> {
        if fanout_cap == 0 {
            return Err(ConfigError::invalid("fanout", "must be at least 1"));
        }
        if h_max == 0 {
            return Err(ConfigError::invalid("hmax", "must be at least 1"));
        }
        Ok(GossipConfig { fanout_cap, h_max })
    }

    pub fn fanout_cap(&self) -> usize {
        self.fanout_cap
    }

    pub fn h_max(&self) -> u32 {
        self.h_max
    }
}

impl Default for GossipConfig {
    fn default() -> Self {
        GossipConfig {
            fanout_cap: DEFAULT_FANOUT,
            h_max: DEFAULT_HOP_LIMIT,
        }
    }
}

/// Message ids an agent has processed. Insert-only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenSet(BTreeSet<String>);

impl SeenSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the id was not present before.
    pub fn insert(&mut self, id: &str) -> bool {
        self.0.insert(id.to_string())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.contains(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    AlreadySeen,
    HopLimit,
}

/// Outcome of [`handle_gossip`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GossipAction {
    Dropped(DropReason),
    /// Process locally, then send `copy` to each of `forward_to`.
    Process {
        forward_to: Vec<AgentId>,
        copy: MedicalMessage,
    },
}

/// Applies the receive guard and picks forwarding targets. `peers` must be in
/// a stable order (the network keeps them sorted) so sampling is reproducible.
pub fn handle_gossip<R: Rng + ?Sized>(
    msg: &MedicalMessage,
    seen: &mut SeenSet,
    peers: &[AgentId],
    arrived_from: Option<&AgentId>,
    config: &GossipConfig,
    rng: &mut R,
) -> GossipAction {
    if seen.contains(&msg.id) {
        return GossipAction::Dropped(DropReason::AlreadySeen);
    }
    if msg.hop_count >= config.h_max {
        return GossipAction::Dropped(DropReason::HopLimit);
    }
    seen.insert(&msg.id);

    let candidates: Vec<&AgentId> = peers.iter().filter(|p| Some(*p) != arrived_from).collect();
    let k = config.fanout_cap.min(candidates.len());
    let forward_to = index::sample(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect();
    GossipAction::Process {
        forward_to,
        copy: msg.forwarded(),
    }
}

/// Expected reach after `h` hops with fanout `k`: `1 + k + ... + k^h`.
///
/// The closed form `(k^(h+1) - 1) / (k - 1)` is singular at `k = 1`, where the
/// sum is `h + 1`.
pub fn expected_coverage(k: u32, h: u32) -> f64 {
    if k == 1 {
        return f64::from(h) + 1.0;
    }
    match u128::from(k).checked_pow(h + 1) {
        Some(p) => ((p - 1) / u128::from(k - 1)) as f64,
        None => (f64::from(k).powi(h as i32 + 1) - 1.0) / f64::from(k - 1),
    }
}

/// Fraction of agents whose seen-set holds `message_id`; 0 for unknown ids.
pub fn measured_coverage(message_id: &str, network: &SimNetwork) -> f64 {
    network.coverage(message_id)
}
