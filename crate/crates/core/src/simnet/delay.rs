use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Per-link one-way delay in virtual milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Fixed {
        ms: u64,
    },
    /// Inclusive on both ends.
    Uniform {
        lo_ms: u64,
        hi_ms: u64,
    },
}

impl DelayModel {
    pub fn fixed(ms: u64) -> Self {
        DelayModel::Fixed { ms }
    }

    pub fn uniform(lo_ms: u64, hi_ms: u64) -> Result<Self, ConfigError> {
        if lo_ms > hi_ms {
            return Err(ConfigError::invalid(
                "delay_uniform_ms",
                format!("lower bound {lo_ms} exceeds upper bound {hi_ms}"),
            ));
        }
        Ok(DelayModel::Uniform { lo_ms, hi_ms })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            DelayModel::Fixed { ms } => ms,
            DelayModel::Uniform { lo_ms, hi_ms } => rng.gen_range(lo_ms..=hi_ms),
        }
    }

    pub fn max_ms(&self) -> u64 {
        match *self {
            DelayModel::Fixed { ms } => ms,
            DelayModel::Uniform { hi_ms, .. } => hi_ms,
        }
    }

    /// Default vote timeout: 20 x the largest link delay (at least 1 ms).
    pub fn default_vote_timeout_ms(&self) -> u64 {
        (20 * self.max_ms()).max(1)
    }
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Fixed { ms: 5 }
    }
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayModel::Fixed { ms } => write!(f, "FIXED({ms})"),
            DelayModel::Uniform { lo_ms, hi_ms } => write!(f, "UNIFORM({lo_ms},{hi_ms})"),
        }
    }
}
