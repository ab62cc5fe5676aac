use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab;
use crate::error::ConfigError;
use crate::message::{MedicalMessage, MessageType};
use crate::simnet::{AgentId, Attack};

/// Number of messages to corrupt per attack category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub invalid_signature: usize,
    pub expired_timestamp: usize,
    pub malformed_content: usize,
}

impl AttackPlan {
    /// 20 forged signatures, 15 expired stamps, 15 malformed payloads.
    pub const STANDARD: AttackPlan = AttackPlan {
        invalid_signature: 20,
        expired_timestamp: 15,
        malformed_content: 15,
    };

    pub fn total(&self) -> usize {
        self.invalid_signature + self.expired_timestamp + self.malformed_content
    }

    pub fn count(&self, attack: Attack) -> usize {
        match attack {
            Attack::InvalidSignature => self.invalid_signature,
            Attack::ExpiredTimestamp => self.expired_timestamp,
            Attack::MalformedContent => self.malformed_content,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerPolicy {
    /// Message `i` is proposed by agent `i mod n`.
    #[default]
    RoundRobin,
    /// Every message comes from the agent with this 0-based index.
    Single(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub patient_data: usize,
    pub diagnosis: usize,
    pub treatment_plan: usize,
    pub emergency_alert: usize,
    pub attacks: AttackPlan,
    /// Virtual time between consecutive proposals.
    pub gap_ms: u64,
    /// Virtual time of the first proposal.
    pub start_ms: u64,
    pub proposer: ProposerPolicy,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec::per_type(25)
    }
}

impl WorkloadSpec {
    pub const DEFAULT_GAP_MS: u64 = 1_000;
    pub const DEFAULT_START_MS: u64 = 600_000;

    pub fn per_type(count: usize) -> Self {
        WorkloadSpec {
            patient_data: count,
            diagnosis: count,
            treatment_plan: count,
            emergency_alert: count,
            attacks: AttackPlan::default(),
            gap_ms: Self::DEFAULT_GAP_MS,
            start_ms: Self::DEFAULT_START_MS,
            proposer: ProposerPolicy::RoundRobin,
        }
    }

    pub fn count(&self, t: MessageType) -> usize {
        match t {
            MessageType::PatientData => self.patient_data,
            MessageType::Diagnosis => self.diagnosis,
            MessageType::TreatmentPlan => self.treatment_plan,
            MessageType::EmergencyAlert => self.emergency_alert,
        }
    }

    pub fn total(&self) -> usize {
        MessageType::ALL.iter().map(|t| self.count(*t)).sum()
    }

    pub fn validate(&self, n: usize, max_age_ms: u64) -> Result<(), ConfigError> {
        if self.attacks.total() > self.total() {
            return Err(ConfigError::invalid(
                "inject",
                format!(
                    "attack plan corrupts {} messages but the workload has only {}",
                    self.attacks.total(),
                    self.total()
                ),
            ));
        }
        if self.gap_ms == 0 {
            return Err(ConfigError::invalid("gap_ms", "must be positive"));
        }
        if self.attacks.expired_timestamp > 0 && self.start_ms <= max_age_ms {
            return Err(ConfigError::invalid(
                "start_ms",
                format!("expired-timestamp attacks need start_ms > max_age_ms ({max_age_ms})"),
            ));
        }
        if let ProposerPolicy::Single(i) = self.proposer {
            if i >= n {
                return Err(ConfigError::invalid(
                    "proposer",
                    format!("agent index {i} >= n = {n}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadItem {
    /// Honestly signed, stamped at `propose_at_ms`.
    pub message: MedicalMessage,
    pub proposer: AgentId,
    pub propose_at_ms: u64,
    /// Corruption applied by the proposer when the message is proposed.
    pub attack: Option<Attack>,
}

/// Builds the message list. Types are interleaved round-robin
/// (PATIENT_DATA, DIAGNOSIS, TREATMENT_PLAN, EMERGENCY_ALERT, ...) until each
/// count is exhausted.
pub fn generate_workload<R: Rng + ?Sized>(
    spec: &WorkloadSpec,
    agents: &[AgentId],
    rng: &mut R,
) -> Result<Vec<WorkloadItem>, ConfigError> {
    if agents.is_empty() {
        return Err(ConfigError::invalid(
            "n",
            "workload needs at least one agent",
        ));
    }
    spec.validate(agents.len(), 0)?;

    let mut remaining: BTreeMap<MessageType, usize> = MessageType::ALL
        .iter()
        .map(|t| (*t, spec.count(*t)))
        .collect();
    let mut order = Vec::with_capacity(spec.total());
    while order.len() < spec.total() {
        for t in MessageType::ALL {
            let left = remaining.get_mut(&t).expect("all types present");
            if *left > 0 {
                *left -= 1;
                order.push(t);
            }
        }
    }

    let mut items = Vec::with_capacity(order.len());
    for (i, msg_type) in order.into_iter().enumerate() {
        let proposer = match spec.proposer {
            ProposerPolicy::RoundRobin => agents[i % agents.len()].clone(),
            ProposerPolicy::Single(j) => agents[j].clone(),
        };
        let at = spec.start_ms + i as u64 * spec.gap_ms;
        let content = synthetic_content(msg_type, rng);
        let message = MedicalMessage::new(
            format!("msg-{:04}", i + 1),
            msg_type,
            content,
            at,
            proposer.as_str(),
        )
        .expect("vocabulary contains no reserved characters");
        items.push(WorkloadItem {
            message,
            proposer,
            propose_at_ms: at,
            attack: None,
        });
    }

    let picks = index::sample(rng, items.len(), spec.attacks.total()).into_vec();
    let mut cursor = picks.into_iter();
    for attack in Attack::ALL {
        for idx in cursor.by_ref().take(spec.attacks.count(attack)) {
            items[idx].attack = Some(attack);
        }
    }
    Ok(items)
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, list: &'a [&'a str]) -> &'a str {
    list.choose(rng).expect("vocabulary lists are non-empty")
}

fn synthetic_content<R: Rng + ?Sized>(
    msg_type: MessageType,
    rng: &mut R,
) -> BTreeMap<String, String> {
    let patient = format!("P{:04}", rng.gen_range(1..=vocab::PATIENT_COUNT));
    let mut c = BTreeMap::new();
    c.insert("patient_id".to_string(), patient);
    match msg_type {
        MessageType::PatientData => {
            let (data_type, (lo, hi)) = *vocab::VITALS.choose(rng).expect("non-empty");
            c.insert("data_type".into(), data_type.into());
            c.insert("value".into(), rng.gen_range(lo..=hi).to_string());
        }
        MessageType::Diagnosis => {
            c.insert("diagnosis".into(), pick(rng, vocab::DIAGNOSES).into());
            // Two decimals, uniform over 0.00..=1.00.
            let hundredths: u32 = rng.gen_range(0..=100);
            c.insert(
                "confidence".into(),
                format!("{:.2}", f64::from(hundredths) / 100.0),
            );
            c.insert(
                "doctor_id".into(),
                format!("D{:03}", rng.gen_range(1..=vocab::DOCTOR_COUNT)),
            );
        }
        MessageType::TreatmentPlan => {
            c.insert("treatment".into(), pick(rng, vocab::TREATMENTS).into());
            c.insert("duration".into(), format!("{}d", rng.gen_range(1..=30)));
            c.insert(
                "doctor_id".into(),
                format!("D{:03}", rng.gen_range(1..=vocab::DOCTOR_COUNT)),
            );
        }
        MessageType::EmergencyAlert => {
            c.insert("alert_type".into(), pick(rng, vocab::ALERT_TYPES).into());
            c.insert("severity".into(), pick(rng, vocab::SEVERITIES).into());
            c.insert("location".into(), pick(rng, vocab::LOCATIONS).into());
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{validate_message, ValidationConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agents(n: usize) -> Vec<AgentId> {
        (0..n).map(AgentId::numbered).collect()
    }

    #[test]
    fn default_workload_is_balanced_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let items = generate_workload(&WorkloadSpec::default(), &agents(4), &mut rng).unwrap();
        assert_eq!(items.len(), 100);
        for t in MessageType::ALL {
            assert_eq!(items.iter().filter(|i| i.message.msg_type == t).count(), 25);
        }
        let cfg = ValidationConfig::default();
        for (i, item) in items.iter().enumerate() {
            assert!(validate_message(&item.message, item.propose_at_ms, &cfg).accepted());
            assert_eq!(item.propose_at_ms, 600_000 + 1000 * i as u64);
            assert_eq!(item.proposer, AgentId::numbered(i % 4));
            assert_eq!(item.message.sender, item.proposer.as_str());
            assert!(item.attack.is_none());
        }
    }

    #[test]
    fn table_two_plan_counts() {
        let spec = WorkloadSpec {
            attacks: AttackPlan::STANDARD,
            ..WorkloadSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let items = generate_workload(&spec, &agents(4), &mut rng).unwrap();
        let count = |a| items.iter().filter(|i| i.attack == Some(a)).count();
        assert_eq!(count(Attack::InvalidSignature), 20);
        assert_eq!(count(Attack::ExpiredTimestamp), 15);
        assert_eq!(count(Attack::MalformedContent), 15);
    }

    #[test]
    fn empty_and_oversized_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = WorkloadSpec::per_type(0);
        assert!(generate_workload(&empty, &agents(4), &mut rng)
            .unwrap()
            .is_empty());

        let too_many = WorkloadSpec {
            attacks: AttackPlan {
                invalid_signature: 101,
                ..AttackPlan::default()
            },
            ..WorkloadSpec::default()
        };
        assert!(generate_workload(&too_many, &agents(4), &mut rng).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = WorkloadSpec {
            attacks: AttackPlan::STANDARD,
            ..WorkloadSpec::default()
        };
        let gen = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_workload(&spec, &agents(4), &mut rng).unwrap()
        };
        assert_eq!(gen(5), gen(5));
        assert_ne!(gen(5), gen(6));
    }

    #[test]
    fn confidence_has_two_decimals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = WorkloadSpec {
            patient_data: 0,
            diagnosis: 200,
            treatment_plan: 0,
            emergency_alert: 0,
            ..WorkloadSpec::default()
        };
        for item in generate_workload(&spec, &agents(4), &mut rng).unwrap() {
            let c = &item.message.content["confidence"];
            assert_eq!(c.len(), 4, "{c}");
            let v: f64 = c.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn expired_attacks_need_an_epoch() {
        let spec = WorkloadSpec {
            start_ms: 1_000,
            attacks: AttackPlan::STANDARD,
            ..WorkloadSpec::default()
        };
        assert!(spec.validate(4, 300_000).is_err());
        assert!(WorkloadSpec::default().validate(4, 300_000).is_ok());
    }
}
