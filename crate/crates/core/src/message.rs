//! Healthcare message model, canonical encoding, digest and validation.
//!
//! A message is signed by hashing a canonical byte string:
//!
//! ```text
//! id | TYPE | k1=v1;k2=v2 | timestamp_ms | sender
//! ```
//!
//! Content pairs are sorted by key. `|`, `;` and `=` are reserved and may not
//! appear in any string field, which keeps the encoding injective. The digest
//! is a plain SHA-256: it detects tampering but anyone can recompute it, so it
//! does not authenticate the sender.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::MessageError;

/// Characters that delimit the canonical encoding.
pub const RESERVED: [char; 3] = ['|', ';', '='];

/// Default freshness window: 300 virtual seconds.
pub const DEFAULT_MAX_AGE_MS: u64 = 300_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageType {
    PatientData,
    Diagnosis,
    TreatmentPlan,
    EmergencyAlert,
}

impl MessageType {
    pub const ALL: [MessageType; 4] = [
        MessageType::PatientData,
        MessageType::Diagnosis,
        MessageType::TreatmentPlan,
        MessageType::EmergencyAlert,
    ];

    /// Wire name, as used in the canonical encoding.
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::PatientData => "PATIENT_DATA",
            MessageType::Diagnosis => "DIAGNOSIS",
            MessageType::TreatmentPlan => "TREATMENT_PLAN",
            MessageType::EmergencyAlert => "EMERGENCY_ALERT",
        }
    }

    /// Table label ("Patient Data", ...).
    pub fn label(self) -> &'static str {
        match self {
            MessageType::PatientData => "Patient Data",
            MessageType::Diagnosis => "Diagnosis",
            MessageType::TreatmentPlan => "Treatment Plan",
            MessageType::EmergencyAlert => "Emergency Alert",
        }
    }

    /// Content keys that must be present and non-empty.
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            MessageType::PatientData => &["patient_id", "data_type", "value"],
            MessageType::Diagnosis => &["patient_id", "diagnosis", "confidence", "doctor_id"],
            MessageType::TreatmentPlan => &["patient_id", "treatment", "duration", "doctor_id"],
            MessageType::EmergencyAlert => &["patient_id", "alert_type", "severity", "location"],
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageType {
    type Err = MessageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| MessageError::UnknownType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MedicalMessage {
    pub id: String,
    pub msg_type: MessageType,
    pub content: BTreeMap<String, String>,
    pub timestamp_ms: u64,
    pub sender: String,
    /// Lowercase hex SHA-256 over [`canonical_bytes`].
    pub signature: String,
    /// Gossip hops travelled; not covered by the signature.
    pub hop_count: u32,
}

impl MedicalMessage {
    /// Builds and signs a message at hop 0.
    pub fn new(
        id: impl Into<String>,
        msg_type: MessageType,
        content: BTreeMap<String, String>,
        timestamp_ms: u64,
        sender: impl Into<String>,
    ) -> Result<Self, MessageError> {
        let mut msg = MedicalMessage {
            id: id.into(),
            msg_type,
            content,
            timestamp_ms,
            sender: sender.into(),
            signature: String::new(),
            hop_count: 0,
        };
        if msg.id.is_empty() {
            return Err(MessageError::EmptyField("id"));
        }
        if msg.sender.is_empty() {
            return Err(MessageError::EmptyField("sender"));
        }
        msg.signature = compute_signature(&msg)?;
        Ok(msg)
    }

    /// Recomputes the signature over the current fields.
    pub fn resign(&mut self) -> Result<(), MessageError> {
        self.signature = compute_signature(self)?;
        Ok(())
    }

    /// A copy one hop further along.
    pub fn forwarded(&self) -> Self {
        MedicalMessage {
            hop_count: self.hop_count + 1,
            ..self.clone()
        }
    }
}

fn check_reserved(field: &str, value: &str) -> Result<(), MessageError> {
    match value.chars().find(|c| RESERVED.contains(c)) {
        Some(delimiter) => Err(MessageError::ReservedDelimiter {
            field: field.to_string(),
            delimiter,
            value: value.to_string(),
        }),
        None => Ok(()),
    }
}

/// Canonical preimage of the signature. `signature` and `hop_count` are
/// excluded.
pub fn canonical_bytes(msg: &MedicalMessage) -> Result<Vec<u8>, MessageError> {
    check_reserved("id", &msg.id)?;
    check_reserved("sender", &msg.sender)?;
    for (key, value) in &msg.content {
        check_reserved("content key", key)?;
        check_reserved(key, value)?;
    }

    // BTreeMap iterates in key order.
    let content = msg
        .content
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    let text = format!(
        "{}|{}|{}|{}|{}",
        msg.id,
        msg.msg_type.as_str(),
        content,
        msg.timestamp_ms,
        msg.sender
    );
    Ok(text.into_bytes())
}

pub fn compute_signature(msg: &MedicalMessage) -> Result<String, MessageError> {
    let bytes = canonical_bytes(msg)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `false` when the digest does not match or the message cannot be encoded.
pub fn verify_signature(msg: &MedicalMessage) -> bool {
    compute_signature(msg).is_ok_and(|sig| sig == msg.signature)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictReason {
    Ok,
    BadSignature,
    StaleTimestamp,
    FutureTimestamp,
    MalformedContent,
}

/// Outcome of validation. Accepted exactly when the reason is
/// [`VerdictReason::Ok`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub reason: VerdictReason,
}

impl ValidationVerdict {
    pub const OK: ValidationVerdict = ValidationVerdict {
        reason: VerdictReason::Ok,
    };

    pub fn reject(reason: VerdictReason) -> Self {
        ValidationVerdict { reason }
    }

    pub fn accepted(&self) -> bool {
        self.reason == VerdictReason::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub max_age_ms: u64,
    pub future_skew_ms: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            max_age_ms: DEFAULT_MAX_AGE_MS,
            future_skew_ms: 0,
        }
    }
}

/// Stale when the age reaches `max_age_ms` (the window is strict), future
/// when the stamp is ahead of `now_ms` by more than `future_skew_ms`.
pub fn check_freshness(
    timestamp_ms: u64,
    now_ms: u64,
    max_age_ms: u64,
    future_skew_ms: u64,
) -> ValidationVerdict {
    if timestamp_ms > now_ms.saturating_add(future_skew_ms) {
        return ValidationVerdict::reject(VerdictReason::FutureTimestamp);
    }
    let age = now_ms.saturating_sub(timestamp_ms);
    if age >= max_age_ms {
        return ValidationVerdict::reject(VerdictReason::StaleTimestamp);
    }
    ValidationVerdict::OK
}

/// Plain decimal: digits with at most one interior point. Rejects signs,
/// exponents, `inf` and `NaN`, which `f64::from_str` would otherwise accept.
fn parse_plain_decimal(text: &str) -> Option<f64> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (text, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let ok = match frac {
        None => digits(int),
        Some(f) => digits(int) && digits(f),
    };
    if ok {
        text.parse().ok()
    } else {
        None
    }
}

/// Per-type required fields. Extra keys are allowed.
pub fn validate_content(msg_type: MessageType, content: &BTreeMap<String, String>) -> bool {
    let present = msg_type
        .required_fields()
        .iter()
        .all(|key| content.get(*key).is_some_and(|v| !v.is_empty()));
    if !present {
        return false;
    }
    if msg_type == MessageType::Diagnosis {
        return content
            .get("confidence")
            .and_then(|c| parse_plain_decimal(c))
            .is_some_and(|c| (0.0..=1.0).contains(&c));
    }
    true
}

/// Signature, then freshness, then content. The first failure is reported.
pub fn validate_message(
    msg: &MedicalMessage,
    now_ms: u64,
    config: &ValidationConfig,
) -> ValidationVerdict {
    if !verify_signature(msg) {
        return ValidationVerdict::reject(VerdictReason::BadSignature);
    }
    let fresh = check_freshness(
        msg.timestamp_ms,
        now_ms,
        config.max_age_ms,
        config.future_skew_ms,
    );
    if !fresh.accepted() {
        return fresh;
    }
    if !validate_content(msg.msg_type, &msg.content) {
        return ValidationVerdict::reject(VerdictReason::MalformedContent);
    }
    ValidationVerdict::OK
}
