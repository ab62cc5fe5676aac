//! Payload corruptions used for fault injection.
//!
//! Each corruption is built to fail exactly one validation stage: the stale
//! and malformed variants re-sign the corrupted fields so the signature check
//! still passes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::message::{compute_signature, MedicalMessage, MessageType};
use crate::simnet::ByzantineProfile;

/// Per-message fault category; each one fails exactly one validation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Attack {
    InvalidSignature,
    ExpiredTimestamp,
    MalformedContent,
}

impl Attack {
    pub const ALL: [Attack; 3] = [
        Attack::InvalidSignature,
        Attack::ExpiredTimestamp,
        Attack::MalformedContent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attack::InvalidSignature => "INVALID_SIGNATURE",
            Attack::ExpiredTimestamp => "EXPIRED_TIMESTAMP",
            Attack::MalformedContent => "MALFORMED_CONTENT",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Attack::InvalidSignature => "Invalid Signature",
            Attack::ExpiredTimestamp => "Expired Timestamp",
            Attack::MalformedContent => "Malformed Content",
        }
    }

    pub fn profile(self) -> ByzantineProfile {
        match self {
            Attack::InvalidSignature => ByzantineProfile::BadSigner,
            Attack::ExpiredTimestamp => ByzantineProfile::StaleStamper,
            Attack::MalformedContent => ByzantineProfile::Malformer,
        }
    }

    pub fn from_profile(profile: ByzantineProfile) -> Option<Self> {
        match profile {
            ByzantineProfile::BadSigner => Some(Attack::InvalidSignature),
            ByzantineProfile::StaleStamper => Some(Attack::ExpiredTimestamp),
            ByzantineProfile::Malformer => Some(Attack::MalformedContent),
            _ => None,
        }
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Attack {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attack::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::invalid("attack", format!("unknown attack {s:?}")))
    }
}

/// Corrupts `msg` according to `profile`. Profiles without a payload
/// corruption return the message unchanged.
pub fn apply_byzantine_corruption<R: Rng + ?Sized>(
    msg: &MedicalMessage,
    profile: ByzantineProfile,
    rng: &mut R,
    now_ms: u64,
    max_age_ms: u64,
) -> MedicalMessage {
    let mut out = msg.clone();
    match profile {
        ByzantineProfile::BadSigner => {
            let correct = compute_signature(msg).unwrap_or_default();
            loop {
                let noise: [u8; 32] = rng.gen();
                let forged = hex::encode(Sha256::digest(noise));
                if forged != correct {
                    out.signature = forged;
                    break;
                }
            }
        }
        ByzantineProfile::StaleStamper => {
            out.timestamp_ms = now_ms.saturating_sub(max_age_ms + 1);
            resign(&mut out);
        }
        ByzantineProfile::Malformer => {
            let required = out.msg_type.required_fields();
            let bad_confidence = out.msg_type == MessageType::Diagnosis && rng.gen_bool(0.5);
            if bad_confidence {
                out.content.insert("confidence".into(), "1.5".into());
            } else {
                let key = required[rng.gen_range(0..required.len())];
                out.content.remove(key);
            }
            resign(&mut out);
        }
        ByzantineProfile::Honest | ByzantineProfile::VoteFlipper | ByzantineProfile::Silent => {}
    }
    out
}

fn resign(msg: &mut MedicalMessage) {
    // The corruptions only touch fields that were already encodable.
    if let Ok(sig) = compute_signature(msg) {
        msg.signature = sig;
    }
}
