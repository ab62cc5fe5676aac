//! Byzantine quorum consensus over gossip-propagated healthcare messages.
//!
//! The crate is organised bottom-up:
//!
//! * [`message`]: the signed message model, canonical serialization and the
//!   validation pipeline (signature, freshness, per-type content rules).
//! * [`consensus`]: per-message vote ledgers with a `2f + 1` quorum.
//! * [`gossip`]: fanout-limited, hop-limited epidemic dissemination.
//! * [`simnet`]: a deterministic discrete-event network with a virtual clock
//!   and Byzantine behaviour profiles.
//! * [`harness`]: workload generation, experiments, sweeps and metrics.
//! * [`config`]: the flat `key=value` run configuration.

pub mod config;
pub mod consensus;
pub mod error;
pub mod gossip;
pub mod harness;
pub mod message;
pub mod simnet;

pub use config::RunConfig;
pub use consensus::{ConsensusRound, Decision, DecisionReason, QuorumConfig, Vote};
pub use error::{ConfigError, MessageError, SimError};
pub use gossip::{expected_coverage, GossipConfig, SeenSet};
pub use harness::{
    generate_workload, run_experiment, run_scalability_sweep, ExperimentMetrics, SweepPoint,
    WorkloadSpec,
};
pub use message::{
    canonical_bytes, check_freshness, compute_signature, validate_content, validate_message,
    verify_signature, MedicalMessage, MessageType, ValidationConfig, ValidationVerdict,
    VerdictReason,
};
pub use simnet::{AgentId, ByzantineProfile, DelayModel, SimNetwork, Specialization};
