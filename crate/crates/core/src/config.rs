//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys are case-insensitive and `-` is read as `_`, so every CLI flag name
//! is also a valid key. Later assignments win.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::ConfigError;
use crate::gossip::GossipConfig;
use crate::harness::{AttackPlan, NetworkSpec, ProposerPolicy, WorkloadSpec};
use crate::simnet::{ByzantineProfile, DelayModel};

/// Every recognised key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    (
        "seed",
        "u64, required. Seeds every random choice of the run",
    ),
    ("n", "number of agents (default 4)"),
    ("f", "tolerated Byzantine agents; n >= 3f + 1 (default 1)"),
    ("topology", "FULL (the only supported topology)"),
    ("fanout", "gossip fanout cap k >= 1 (default 2)"),
    ("hmax", "gossip hop limit >= 1 (default 3)"),
    ("max_age_ms", "freshness window, positive (default 300000)"),
    (
        "future_skew_ms",
        "tolerated clock skew for future stamps (default 0)",
    ),
    (
        "delay_fixed_ms",
        "constant link delay, positive (default 5)",
    ),
    (
        "delay_uniform_ms",
        "`lo hi`: link delay uniform on [lo, hi], lo >= 1",
    ),
    (
        "vote_timeout_ms",
        "round deadline after proposal (default 20 x max delay)",
    ),
    (
        "max_events",
        "abort after this many events (default 10000000)",
    ),
    (
        "byzantine",
        "comma list of agent-N:PROFILE, e.g. agent-2:VOTE_FLIPPER",
    ),
    ("messages_per_type", "sets all four per-type counts at once"),
    ("patient_data", "PATIENT_DATA messages (default 25)"),
    ("diagnosis", "DIAGNOSIS messages (default 25)"),
    ("treatment_plan", "TREATMENT_PLAN messages (default 25)"),
    ("emergency_alert", "EMERGENCY_ALERT messages (default 25)"),
    (
        "gap_ms",
        "virtual time between proposals, positive (default 1000)",
    ),
    (
        "start_ms",
        "virtual time of the first proposal (default 600000)",
    ),
    ("proposer", "round_robin or agent-N (default round_robin)"),
    (
        "inject_invalid_signature",
        "forged signatures (inject default 20, run default 0)",
    ),
    (
        "inject_expired_timestamp",
        "expired timestamps (inject default 15, run default 0)",
    ),
    (
        "inject_malformed_content",
        "malformed payloads (inject default 15, run default 0)",
    ),
    (
        "sweep_f",
        "inclusive f range for sweep, `lo..hi` (default 1..10)",
    ),
    ("out", "output directory (default out)"),
    ("trace", "true writes events.ndjson (default false)"),
    ("jobs", "sweep worker threads (default 1)"),
];

/// Attack counts given explicitly; unset entries fall back per command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectOverrides {
    pub invalid_signature: Option<usize>,
    pub expired_timestamp: Option<usize>,
    pub malformed_content: Option<usize>,
}

impl InjectOverrides {
    pub fn resolve(&self, fallback: AttackPlan) -> AttackPlan {
        AttackPlan {
            invalid_signature: self.invalid_signature.unwrap_or(fallback.invalid_signature),
            expired_timestamp: self.expired_timestamp.unwrap_or(fallback.expired_timestamp),
            malformed_content: self.malformed_content.unwrap_or(fallback.malformed_content),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub network: NetworkSpec,
    /// Attack counts here are ignored; see [`RunConfig::inject`].
    pub workload: WorkloadSpec,
    pub inject: InjectOverrides,
    pub sweep_f: (usize, usize),
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            network: NetworkSpec::new(4, 1),
            workload: WorkloadSpec::default(),
            inject: InjectOverrides::default(),
            sweep_f: (1, 10),
            out: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    /// Parses and applies every line. Does not [`validate`](Self::validate).
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::invalid("config", format!("cannot read {}: {e}", path.display()))
        })?;
        text.parse()
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            if key.trim().is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            self.apply(key, value)?;
        }
        Ok(())
    }

    /// Sets one key. Values are checked for syntax and local range here and
    /// for cross-key consistency in [`validate`](Self::validate).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        let net = &mut self.network;
        let wl = &mut self.workload;
        match k {
            "seed" => self.seed = Some(parse(k, value)?),
            "n" => net.n = parse(k, value)?,
            "f" => net.f = parse(k, value)?,
            "topology" => {
                if !value.eq_ignore_ascii_case("full") {
                    return Err(ConfigError::invalid(
                        k,
                        format!("only FULL is supported, got {value:?}"),
                    ));
                }
            }
            "fanout" => net.gossip = GossipConfig::new(parse(k, value)?, net.gossip.h_max())?,
            "hmax" => net.gossip = GossipConfig::new(net.gossip.fanout_cap(), parse(k, value)?)?,
            "max_age_ms" => net.validation.max_age_ms = positive(k, value)?,
            "future_skew_ms" => net.validation.future_skew_ms = parse(k, value)?,
            "delay_fixed_ms" => net.delay = DelayModel::fixed(positive(k, value)?),
            "delay_uniform_ms" => {
                let parts: Vec<&str> = value
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .collect();
                let [lo, hi] = parts[..] else {
                    return Err(ConfigError::invalid(
                        k,
                        format!("expected `lo hi`, got {value:?}"),
                    ));
                };
                net.delay = DelayModel::uniform(positive(k, lo)?, parse(k, hi)?)?;
            }
            "vote_timeout_ms" => net.vote_timeout_ms = Some(positive(k, value)?),
            "max_events" => net.max_events = positive(k, value)?,
            "trace" => net.trace = parse_bool(k, value)?,
            "byzantine" => net.byzantine = parse_byzantine(value)?,
            "messages_per_type" => {
                let c = parse(k, value)?;
                wl.patient_data = c;
                wl.diagnosis = c;
                wl.treatment_plan = c;
                wl.emergency_alert = c;
            }
            "patient_data" => wl.patient_data = parse(k, value)?,
            "diagnosis" => wl.diagnosis = parse(k, value)?,
            "treatment_plan" => wl.treatment_plan = parse(k, value)?,
            "emergency_alert" => wl.emergency_alert = parse(k, value)?,
            "gap_ms" => wl.gap_ms = positive(k, value)?,
            "start_ms" => wl.start_ms = parse(k, value)?,
            "proposer" => {
                wl.proposer = if value.eq_ignore_ascii_case("round_robin") {
                    ProposerPolicy::RoundRobin
                } else {
                    ProposerPolicy::Single(parse_agent(k, value)?)
                }
            }
            "inject_invalid_signature" => self.inject.invalid_signature = Some(parse(k, value)?),
            "inject_expired_timestamp" => self.inject.expired_timestamp = Some(parse(k, value)?),
            "inject_malformed_content" => self.inject.malformed_content = Some(parse(k, value)?),
            "sweep_f" => self.sweep_f = parse_range(k, value)?,
            "out" => {
                if value.is_empty() {
                    return Err(ConfigError::invalid(k, "must not be empty"));
                }
                self.out = PathBuf::from(value);
            }
            "jobs" => self.jobs = positive(k, value)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Cross-key checks: seed present, `n >= 3f + 1`, Byzantine agents in
    /// range, attack plan fits the workload.
    pub fn validate(&self, attacks: AttackPlan) -> Result<u64, ConfigError> {
        let seed = self.seed.ok_or(ConfigError::Missing("seed"))?;
        self.network.network_config()?;
        self.network.profiles()?;
        self.workload_with(attacks)
            .validate(self.network.n, self.network.validation.max_age_ms)?;
        Ok(seed)
    }

    pub fn workload_with(&self, attacks: AttackPlan) -> WorkloadSpec {
        WorkloadSpec {
            attacks,
            ..self.workload.clone()
        }
    }

    /// Plan for `run`: only explicit counts.
    pub fn run_plan(&self) -> AttackPlan {
        self.inject.resolve(AttackPlan::default())
    }

    /// Plan for `inject`: explicit counts, else the 20/15/15 default.
    pub fn inject_plan(&self) -> AttackPlan {
        self.inject.resolve(AttackPlan::STANDARD)
    }

    pub fn sweep_values(&self) -> Vec<usize> {
        (self.sweep_f.0..=self.sweep_f.1).collect()
    }

    /// The effective configuration as parseable `key = value` text.
    pub fn to_config_string(&self) -> String {
        let net = &self.network;
        let wl = &self.workload;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(seed) = self.seed {
            line("seed", seed.to_string());
        }
        line("n", net.n.to_string());
        line("f", net.f.to_string());
        line("topology", "FULL".into());
        line("fanout", net.gossip.fanout_cap().to_string());
        line("hmax", net.gossip.h_max().to_string());
        line("max_age_ms", net.validation.max_age_ms.to_string());
        line("future_skew_ms", net.validation.future_skew_ms.to_string());
        match net.delay {
            DelayModel::Fixed { ms } => line("delay_fixed_ms", ms.to_string()),
            DelayModel::Uniform { lo_ms, hi_ms } => {
                line("delay_uniform_ms", format!("{lo_ms} {hi_ms}"))
            }
        }
        if let Some(t) = net.vote_timeout_ms {
            line("vote_timeout_ms", t.to_string());
        }
        line("max_events", net.max_events.to_string());
        let byz: Vec<String> = net
            .byzantine
            .iter()
            .map(|(i, p)| format!("agent-{}:{p}", i + 1))
            .collect();
        line("byzantine", byz.join(","));
        line("patient_data", wl.patient_data.to_string());
        line("diagnosis", wl.diagnosis.to_string());
        line("treatment_plan", wl.treatment_plan.to_string());
        line("emergency_alert", wl.emergency_alert.to_string());
        line("gap_ms", wl.gap_ms.to_string());
        line("start_ms", wl.start_ms.to_string());
        line(
            "proposer",
            match wl.proposer {
                ProposerPolicy::RoundRobin => "round_robin".into(),
                ProposerPolicy::Single(i) => format!("agent-{}", i + 1),
            },
        );
        let inj = self.inject;
        for (k, v) in [
            ("inject_invalid_signature", inj.invalid_signature),
            ("inject_expired_timestamp", inj.expired_timestamp),
            ("inject_malformed_content", inj.malformed_content),
        ] {
            if let Some(v) = v {
                line(k, v.to_string());
            }
        }
        line("sweep_f", format!("{}..{}", self.sweep_f.0, self.sweep_f.1));
        line("out", self.out.display().to_string());
        line("trace", net.trace.to_string());
        line("jobs", self.jobs.to_string());
        s
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| ConfigError::invalid(key, format!("{value:?}: {e}")))
}

fn positive<T: FromStr + Default + PartialEq>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let v: T = parse(key, value)?;
    if v == T::default() {
        return Err(ConfigError::invalid(key, "must be positive"));
    }
    Ok(v)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::invalid(
            key,
            format!("expected true or false, got {value:?}"),
        )),
    }
}

/// `agent-N` (1-based) to a 0-based index.
fn parse_agent(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .strip_prefix("agent-")
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|i| *i >= 1)
        .map(|i| i - 1)
        .ok_or_else(|| {
            ConfigError::invalid(key, format!("expected agent-N with N >= 1, got {value:?}"))
        })
}

fn parse_byzantine(value: &str) -> Result<BTreeMap<usize, ByzantineProfile>, ConfigError> {
    let mut map = BTreeMap::new();
    for entry in value.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (agent, profile) = entry.split_once(':').ok_or_else(|| {
            ConfigError::invalid(
                "byzantine",
                format!("expected agent-N:PROFILE, got {entry:?}"),
            )
        })?;
        let index = parse_agent("byzantine", agent.trim())?;
        if map.insert(index, profile.trim().parse()?).is_some() {
            return Err(ConfigError::invalid(
                "byzantine",
                format!("{} listed twice", agent.trim()),
            ));
        }
    }
    Ok(map)
}

/// `lo..hi`, `lo..=hi` (both inclusive) or a single value.
pub fn parse_range(key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || {
        ConfigError::invalid(
            key,
            format!("expected `lo..hi` with 1 <= lo <= hi, got {value:?}"),
        )
    };
    let (lo, hi) = match value.split_once("..") {
        Some((lo, hi)) => (lo.trim(), hi.trim().trim_start_matches('=').trim()),
        None => (value, value),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
