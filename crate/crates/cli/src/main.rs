//! `medgossip run | inject | sweep`.
//!
//! Settings are resolved in three layers: built-in defaults, then the
//! `--config` file, then command-line flags. Exit status is 0 on success,
//! 2 for configuration errors, 3 when a simulation aborts and 1 for I/O
//! failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use medgossip::config::{RunConfig, KEYS};
use medgossip::harness::{
    least_squares_slope, run_experiment, run_experiment_traced, sweep_csv, sweep_json, AttackPlan,
    ExperimentMetrics,
};
use medgossip::simnet::TraceRecord;
use medgossip::{run_scalability_sweep, ConfigError, SimError};

#[derive(Parser, Debug)]
#[command(
    name = "medgossip",
    version,
    about = "Byzantine quorum consensus over gossip, simulated"
)]
#[command(after_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the clean workload and report per-type acceptance.
    Run(Common),
    /// Run with corrupted messages and report detection per attack.
    Inject {
        #[command(flatten)]
        common: Common,
        /// Forged signatures (default 20).
        #[arg(long, value_name = "N")]
        invalid_signature: Option<usize>,
        /// Expired timestamps (default 15).
        #[arg(long, value_name = "N")]
        expired_timestamp: Option<usize>,
        /// Malformed payloads (default 15).
        #[arg(long, value_name = "N")]
        malformed_content: Option<usize>,
    },
    /// Run one experiment per f at n = 3f + 1; `--f` takes a range `lo..hi`.
    Sweep(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Tolerated faults; for `sweep`, an inclusive range such as 1..10.
    #[arg(long, value_name = "F")]
    f: Option<String>,
    #[arg(long, value_name = "K")]
    fanout: Option<usize>,
    #[arg(long, value_name = "H")]
    hmax: Option<u32>,
    #[arg(long, value_name = "MS")]
    max_age_ms: Option<u64>,
    #[arg(long, value_name = "MS", conflicts_with = "delay_uniform_ms")]
    delay_fixed_ms: Option<u64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    delay_uniform_ms: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write events.ndjson.
    #[arg(long)]
    trace: bool,
    /// Worker threads for `sweep`.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

fn config_help() -> String {
    let mut s = String::from("Config keys (flags override the file):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<26} {d}\n"));
    }
    s
}

enum Failure {
    Config(ConfigError),
    Sim(SimError),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c),
            other => Failure::Sim(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Sim(e)) => {
            eprintln!("simulation aborted: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Layers the config file and then the flags over the defaults.
fn resolve(common: &Common, sweep: bool) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let mut flags: Vec<(&str, String)> = Vec::new();
    let mut push = |k, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k, v));
        }
    };
    push("seed", common.seed.map(|v| v.to_string()));
    push("n", common.n.map(|v| v.to_string()));
    push(if sweep { "sweep_f" } else { "f" }, common.f.clone());
    push("fanout", common.fanout.map(|v| v.to_string()));
    push("hmax", common.hmax.map(|v| v.to_string()));
    push("max_age_ms", common.max_age_ms.map(|v| v.to_string()));
    push(
        "delay_fixed_ms",
        common.delay_fixed_ms.map(|v| v.to_string()),
    );
    push(
        "delay_uniform_ms",
        common
            .delay_uniform_ms
            .as_ref()
            .map(|v| format!("{} {}", v[0], v[1])),
    );
    push("out", common.out.as_ref().map(|p| p.display().to_string()));
    push("trace", common.trace.then(|| "true".to_string()));
    push("jobs", common.jobs.map(|v| v.to_string()));
    for (k, v) in flags {
        cfg.apply(k, &v)?;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let cfg = resolve(&common, false)?;
            let plan = cfg.run_plan();
            single_run(&cfg, plan, false)
        }
        Command::Inject {
            common,
            invalid_signature,
            expired_timestamp,
            malformed_content,
        } => {
            let mut cfg = resolve(&common, false)?;
            let overrides = &mut cfg.inject;
            overrides.invalid_signature = invalid_signature.or(overrides.invalid_signature);
            overrides.expired_timestamp = expired_timestamp.or(overrides.expired_timestamp);
            overrides.malformed_content = malformed_content.or(overrides.malformed_content);
            let plan = cfg.inject_plan();
            single_run(&cfg, plan, true)
        }
        Command::Sweep(common) => {
            let cfg = resolve(&common, true)?;
            sweep(&cfg)
        }
    }
}

fn single_run(cfg: &RunConfig, plan: AttackPlan, inject: bool) -> Result<(), Failure> {
    let seed = cfg.validate(plan)?;
    let workload = cfg.workload_with(plan);
    let (metrics, trace) = if cfg.network.trace {
        let (m, t) = run_experiment_traced(&cfg.network, &workload, seed)?;
        (m, Some(t))
    } else {
        (run_experiment(&cfg.network, &workload, seed)?, None)
    };

    let out = &cfg.out;
    create_dir(out)?;
    write(&out.join("metrics.json"), &metrics.to_json())?;
    write(&out.join("table1.csv"), &metrics.table1_csv())?;
    write(&out.join("table2.csv"), &metrics.table2_csv())?;
    if let Some(trace) = trace {
        write(&out.join("events.ndjson"), &TraceRecord::to_ndjson(&trace))?;
    }

    print_header(cfg, seed);
    if inject {
        print!("{}", metrics.render_table2());
        println!(
            "{}/{} rejected",
            metrics.table2_total.rejected, metrics.table2_total.injected
        );
        if !metrics.table2_total.isolated_stage {
            println!("warning: some corrupt messages failed a stage other than the targeted one");
        }
    } else {
        print!("{}", metrics.render_table1());
        if metrics.table2_total.injected > 0 {
            println!();
            print!("{}", metrics.render_table2());
        }
    }
    print_summary(&metrics);
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let plan = cfg.run_plan();
    let f_values = cfg.sweep_values();
    // n and f come from the range; validate at the smallest size.
    let mut first = cfg.clone();
    first.network = cfg.network.with_f(f_values[0]);
    let seed = first.validate(plan)?;
    let base = &first.network;
    let workload = cfg.workload_with(plan);
    let points = run_scalability_sweep(&f_values, base, &workload, seed, cfg.jobs)?;

    create_dir(&cfg.out)?;
    let csv = sweep_csv(&points);
    write(&cfg.out.join("sweep.csv"), &csv)?;
    let json = sweep_json(&points);
    write(&cfg.out.join("sweep.json"), &json)?;

    print_header(cfg, seed);
    println!(
        "{:>4}{:>4}{:>11}{:>14}{:>13}{:>14}",
        "n", "f", "threshold", "gossip/prop", "votes/prop", "latency mean"
    );
    for p in &points {
        let m = &p.metrics;
        println!(
            "{:>4}{:>4}{:>11}{:>14}{:>13}{:>14}",
            p.n,
            p.f,
            p.threshold,
            fmt_opt(m.sends.gossip_mean),
            fmt_opt(m.sends.vote_mean),
            fmt_opt(m.latency.mean_ms)
        );
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.metrics.sends.gossip_mean.unwrap_or(0.0))
        .collect();
    if let Some(slope) = least_squares_slope(&xs, &ys) {
        println!("gossip sends per proposal vs n: slope {slope:.3}");
    }
    if cfg.network.trace {
        println!("note: --trace is ignored by sweep");
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn print_header(cfg: &RunConfig, seed: u64) {
    let net = &cfg.network;
    println!(
        "n={} f={} fanout={} hmax={} delay={} seed={}",
        net.n,
        net.f,
        net.gossip.fanout_cap(),
        net.gossip.h_max(),
        net.delay,
        seed
    );
    println!();
}

fn print_summary(m: &ExperimentMetrics) {
    println!();
    println!(
        "coverage mean {} min {} ({} of {} proposals fully covered)",
        fmt_opt(m.coverage.mean),
        fmt_opt(m.coverage.min),
        m.coverage.full_coverage,
        m.coverage.proposals
    );
    println!(
        "latency (virtual ms) mean {} std {} p50 {} p95 {}",
        fmt_opt(m.latency.mean_ms),
        fmt_opt(m.latency.std_ms),
        m.latency.p50_ms.map_or("n/a".into(), |v| v.to_string()),
        m.latency.p95_ms.map_or("n/a".into(), |v| v.to_string()),
    );
    println!(
        "sends per proposal: gossip {} (max {}), votes {}",
        fmt_opt(m.sends.gossip_mean),
        m.sends.gossip_max,
        fmt_opt(m.sends.vote_mean)
    );
    if m.quorum_safety_violations > 0 {
        println!(
            "quorum safety violated in {} rounds (more than f Byzantine agents configured)",
            m.quorum_safety_violations
        );
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.2}"))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}
