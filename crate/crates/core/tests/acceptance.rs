//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use medgossip::harness::{
    prepare_experiment, run_experiment_traced, AttackPlan, ExperimentMetrics, NetworkSpec,
};
use medgossip::message::VerdictReason;
use medgossip::simnet::Attack;
use medgossip::{
    expected_coverage, run_experiment, run_scalability_sweep, ByzantineProfile, Decision,
    DelayModel, GossipConfig, WorkloadSpec,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn table2_workload() -> WorkloadSpec {
    WorkloadSpec {
        attacks: AttackPlan::STANDARD,
        ..WorkloadSpec::default()
    }
}

/// Runs an experiment and re-derives quorum safety from the raw network:
/// every accepted round must hold at least `f + 1` ACCEPTs from agents whose
/// profile is honest.
fn checked_run(
    net: &NetworkSpec,
    workload: &WorkloadSpec,
    seed: u64,
) -> Result<ExperimentMetrics, String> {
    let (mut network, items) =
        prepare_experiment(net, workload, seed).map_err(|e| e.to_string())?;
    network.run().map_err(|e| e.to_string())?;
    let f = net.f;
    for round in network.rounds().values() {
        if round.decision != Decision::Accepted {
            continue;
        }
        let honest = round
            .votes
            .iter()
            .filter(|(_, v)| **v == medgossip::Vote::Accept)
            .filter(|(voter, _)| {
                network
                    .agents()
                    .find(|a| a.id.as_str() == voter.as_str())
                    .is_some_and(|a| a.profile.is_honest())
            })
            .count();
        if net.byzantine_count() <= f && honest < f + 1 {
            return Err(format!(
                "seed {seed}: {} accepted with {honest} honest ACCEPTs, need {}",
                round.message_id,
                f + 1
            ));
        }
    }
    let metrics = medgossip::harness::collect_metrics(&network, &items, net, seed)
        .map_err(|e| e.to_string())?;
    if net.byzantine_count() <= f && metrics.quorum_safety_violations != 0 {
        return Err(format!(
            "seed {seed}: harness reports {} violations",
            metrics.quorum_safety_violations
        ));
    }
    SAFETY_CHECKED_RUNS.with(|c| *c.borrow_mut() += 1);
    Ok(metrics)
}

thread_local! {
    static SAFETY_CHECKED_RUNS: std::cell::RefCell<u64> = const { std::cell::RefCell::new(0) };
}

fn c1_table_one() -> Outcome {
    let net = NetworkSpec::new(4, 1);
    let workload = WorkloadSpec::default();
    let mut slowest = Duration::ZERO;
    for seed in 0..100 {
        let t = Instant::now();
        let m = checked_run(&net, &workload, seed)?;
        slowest = slowest.max(t.elapsed());
        for row in &m.table1 {
            ensure!(
                row.total == 25 && row.accepted == 25 && row.accuracy == Some(1.0),
                "seed {seed}: {} {}/{}",
                row.message_type,
                row.accepted,
                row.total
            );
        }
        let total = &m.table1_total;
        ensure!(
            total.total == 100 && total.accepted == 100 && total.accuracy == Some(1.0),
            "seed {seed}: total {}/{}",
            total.accepted,
            total.total
        );
    }
    ensure!(
        slowest < Duration::from_secs(5),
        "slowest run took {slowest:?}"
    );
    Ok(format!(
        "100/100 accepted on 100 seeds, slowest run {slowest:?}"
    ))
}

fn c2_table_two() -> Outcome {
    let net = NetworkSpec::new(4, 1);
    let workload = table2_workload();
    let expected = [
        (Attack::InvalidSignature, 20, VerdictReason::BadSignature),
        (Attack::ExpiredTimestamp, 15, VerdictReason::StaleTimestamp),
        (
            Attack::MalformedContent,
            15,
            VerdictReason::MalformedContent,
        ),
    ];
    let mut slowest = Duration::ZERO;
    for seed in 0..100 {
        let t = Instant::now();
        let (mut network, items) =
            prepare_experiment(&net, &workload, seed).map_err(|e| e.to_string())?;
        network.run().map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        for (attack, count, reason) in expected {
            let hit: Vec<_> = items.iter().filter(|i| i.attack == Some(attack)).collect();
            ensure!(
                hit.len() == count,
                "seed {seed}: {} {attack:?} injected",
                hit.len()
            );
            for item in hit {
                let id = &item.message.id;
                let round = network
                    .round(id)
                    .ok_or(format!("seed {seed}: no round for {id}"))?;
                ensure!(
                    round.decision == Decision::Rejected,
                    "seed {seed}: {id} not rejected"
                );
                let verdicts = &network.stats()[id].verdicts;
                ensure!(
                    verdicts.len() == 1 && verdicts.contains_key(&reason),
                    "seed {seed}: {id} ({attack:?}) verdicts {verdicts:?}"
                );
            }
        }
        let m = checked_run(&net, &workload, seed)?;
        ensure!(
            m.table2_total.injected == 50 && m.table2_total.rejected == 50,
            "seed {seed}: {}/{} rejected",
            m.table2_total.rejected,
            m.table2_total.injected
        );
        for row in &m.table2 {
            ensure!(
                row.detection_rate == Some(1.0),
                "seed {seed}: {} rate {:?}",
                row.attack_type,
                row.detection_rate
            );
        }
    }
    ensure!(
        slowest < Duration::from_secs(5),
        "slowest run took {slowest:?}"
    );
    Ok(format!(
        "50/50 rejected at the targeted stage on 100 seeds, slowest run {slowest:?}"
    ))
}

fn c3_coverage() -> Outcome {
    let net = NetworkSpec::new(4, 1);
    let mut proposals = 0;
    for seed in 0..100 {
        let m = checked_run(&net, &WorkloadSpec::default(), seed)?;
        for r in &m.messages {
            ensure!(
                r.coverage == 1.0,
                "seed {seed}: {} coverage {}",
                r.id,
                r.coverage
            );
            let hop = r
                .max_processed_hop
                .ok_or(format!("seed {seed}: {} never processed", r.id))?;
            ensure!(hop <= 3, "seed {seed}: {} reached hop {hop}", r.id);
            proposals += 1;
        }
    }
    Ok(format!("{proposals} proposals reached 4/4 within 3 hops"))
}

fn c4_expected_coverage() -> Outcome {
    ensure!(
        expected_coverage(2, 3) == 15.0,
        "E(2,3) = {}",
        expected_coverage(2, 3)
    );
    for k in 1u64..=5 {
        for h in 0u32..=6 {
            let mut sum = 0u64;
            let mut term = 1u64;
            for _ in 0..=h {
                sum += term;
                term *= k;
            }
            let got = expected_coverage(k as u32, h);
            ensure!(got == sum as f64, "k={k} h={h}: {got} != {sum}");
        }
    }
    Ok("E(2,3) = 15; matches the geometric sum for k 1..5, h 0..6".into())
}

fn placements(n: usize, flippers: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == flippers {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn c5_byzantine_tolerance() -> Outcome {
    let workload = WorkloadSpec::default();
    let mut runs = 0;
    for flippers in [1, 2] {
        for placement in placements(4, flippers) {
            let mut net = NetworkSpec::new(4, 1);
            for i in &placement {
                net.byzantine.insert(*i, ByzantineProfile::VoteFlipper);
            }
            for seed in 0..10 {
                let m = checked_run(&net, &workload, seed)?;
                runs += 1;
                for r in &m.messages {
                    let want = if flippers == 1 {
                        Decision::Accepted
                    } else {
                        Decision::Rejected
                    };
                    ensure!(
                        r.decision == want,
                        "flippers at {placement:?}, seed {seed}: {} was {:?}",
                        r.id,
                        r.decision
                    );
                }
            }
        }
    }
    // f = 2 boundary at n = 7: two flippers still accept, three reject.
    for flippers in [2, 3] {
        for placement in placements(7, flippers) {
            let mut net = NetworkSpec::new(7, 2);
            net.gossip = GossipConfig::new(6, 3).map_err(|e| e.to_string())?;
            for i in &placement {
                net.byzantine.insert(*i, ByzantineProfile::VoteFlipper);
            }
            let m = checked_run(&net, &WorkloadSpec::per_type(1), 1)?;
            runs += 1;
            let want = if flippers == 2 {
                Decision::Accepted
            } else {
                Decision::Rejected
            };
            for r in &m.messages {
                ensure!(
                    r.decision == want,
                    "n=7 flippers at {placement:?}: {} was {:?}",
                    r.id,
                    r.decision
                );
            }
        }
    }
    Ok(format!(
        "{runs} runs: f flippers accept, f+1 flippers reject, every placement"
    ))
}

fn c7_sweep() -> Outcome {
    let t = Instant::now();
    let mut base = NetworkSpec::new(4, 1);
    // A non-binding hop limit isolates the fanout term of the send bound.
    base.gossip = GossipConfig::new(2, 30).map_err(|e| e.to_string())?;
    let workload = WorkloadSpec::per_type(10);
    let f_values: Vec<usize> = (1..=10).collect();
    let points =
        run_scalability_sweep(&f_values, &base, &workload, 2024, 1).map_err(|e| e.to_string())?;
    let k = 2.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (p, f) in points.iter().zip(&f_values) {
        ensure!(p.f == *f && p.n == 3 * f + 1, "point f={} n={}", p.f, p.n);
        ensure!(p.threshold == 2 * f + 1, "f={f}: threshold {}", p.threshold);
        let bound = p.n as u64 * 2;
        for r in &p.metrics.messages {
            ensure!(
                r.gossip_sends <= bound,
                "n={}: {} sent {} > n*k = {bound}",
                p.n,
                r.id,
                r.gossip_sends
            );
        }
        ensure!(
            p.metrics.quorum_safety_violations == 0,
            "n={}: safety violation",
            p.n
        );
        xs.push(p.n as f64);
        ys.push(
            p.metrics
                .messages
                .iter()
                .map(|r| r.gossip_sends as f64)
                .sum::<f64>()
                / p.metrics.messages.len() as f64,
        );
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let elapsed = t.elapsed();
    ensure!(
        (k - 0.5..=k + 0.5).contains(&slope),
        "slope {slope:.3} outside [{}, {}]",
        k - 0.5,
        k + 0.5
    );
    ensure!(elapsed < Duration::from_secs(60), "sweep took {elapsed:?}");
    Ok(format!(
        "n 4..31, thresholds 2f+1, sends <= n*k, slope {slope:.3}, {elapsed:?}"
    ))
}

fn c8_virtual_latency() -> Outcome {
    let mut rounds = 0;
    for d in [1u64, 5, 7, 13] {
        let mut net = NetworkSpec::new(4, 1);
        net.delay = DelayModel::fixed(d);
        for seed in 0..20 {
            let (m, trace) = run_experiment_traced(&net, &WorkloadSpec::per_type(2), seed)
                .map_err(|e| e.to_string())?;
            for r in &m.messages {
                ensure!(
                    r.latency_ms == Some(2 * d),
                    "d={d} seed {seed}: {} latency {:?}",
                    r.id,
                    r.latency_ms
                );
                let proposed = trace
                    .iter()
                    .find(|t| t.kind == "propose" && t.message_id == r.id)
                    .ok_or("missing propose record")?
                    .time_ms;
                let decided = trace
                    .iter()
                    .find(|t| t.kind == "decision" && t.message_id == r.id)
                    .ok_or("missing decision record")?
                    .time_ms;
                ensure!(
                    decided - proposed == 2 * d,
                    "d={d}: trace shows {}",
                    decided - proposed
                );
                rounds += 1;
            }
        }
    }
    let mut net = NetworkSpec::new(4, 1);
    net.delay = DelayModel::uniform(1, 10).map_err(|e| e.to_string())?;
    for seed in 0..10 {
        let a = run_experiment(&net, &WorkloadSpec::default(), seed).map_err(|e| e.to_string())?;
        let b = run_experiment(&net, &WorkloadSpec::default(), seed).map_err(|e| e.to_string())?;
        ensure!(
            a.to_json() == b.to_json(),
            "UNIFORM(1,10) seed {seed} not reproducible"
        );
        ensure!(
            a.latency.count == 100,
            "UNIFORM(1,10) seed {seed}: {} accepted",
            a.latency.count
        );
    }
    Ok(format!(
        "{rounds} FIXED(d) rounds decided at exactly 2d; UNIFORM(1,10) reproducible"
    ))
}

fn c9_determinism() -> Outcome {
    let mut flipper = NetworkSpec::new(4, 1);
    flipper.byzantine.insert(2, ByzantineProfile::VoteFlipper);
    let mut uniform = NetworkSpec::new(4, 1);
    uniform.delay = DelayModel::uniform(1, 10).map_err(|e| e.to_string())?;
    let scenarios: Vec<(&str, NetworkSpec, WorkloadSpec)> = vec![
        ("table1", NetworkSpec::new(4, 1), WorkloadSpec::default()),
        ("table2", NetworkSpec::new(4, 1), table2_workload()),
        ("flipper", flipper, WorkloadSpec::default()),
        ("uniform", uniform, table2_workload()),
    ];
    for (name, net, workload) in &scenarios {
        for seed in [0, 42, 9_999] {
            let a = run_experiment(net, workload, seed)
                .map_err(|e| e.to_string())?
                .to_json();
            let b = run_experiment(net, workload, seed)
                .map_err(|e| e.to_string())?
                .to_json();
            ensure!(a == b, "{name} seed {seed}: JSON differs");
            let back = ExperimentMetrics::from_json(&a).map_err(|e| e.to_string())?;
            ensure!(
                back.to_json() == a,
                "{name} seed {seed}: JSON does not round-trip"
            );
        }
    }
    let sweep = |jobs| {
        run_scalability_sweep(
            &[1, 2, 3],
            &NetworkSpec::new(4, 1),
            &WorkloadSpec::per_type(3),
            5,
            jobs,
        )
        .map(|p| medgossip::harness::sweep_json(&p))
    };
    ensure!(
        sweep(1).map_err(|e| e.to_string())? == sweep(1).map_err(|e| e.to_string())?,
        "sweep JSON differs"
    );
    Ok(format!(
        "{} scenarios x 3 seeds byte-identical; sweep byte-identical",
        scenarios.len()
    ))
}

fn c6_quorum_safety() -> Outcome {
    // Scenarios beyond the other criteria: silent and corrupting agents up
    // to f, uniform delays and larger networks.
    let mut extra = 0;
    for (n, f) in [(4, 1), (7, 2), (10, 3)] {
        for profile in [
            ByzantineProfile::Silent,
            ByzantineProfile::VoteFlipper,
            ByzantineProfile::BadSigner,
            ByzantineProfile::StaleStamper,
            ByzantineProfile::Malformer,
        ] {
            let mut net = NetworkSpec::new(n, f);
            net.delay = DelayModel::uniform(1, 10).map_err(|e| e.to_string())?;
            net.gossip = GossipConfig::new(n - 1, 3).map_err(|e| e.to_string())?;
            for i in 0..f {
                net.byzantine.insert(n - 1 - i, profile);
            }
            checked_run(&net, &table2_workload(), 17)
                .map_err(|e| format!("n={n} {profile}: {e}"))?;
            extra += 1;
        }
    }
    let total = SAFETY_CHECKED_RUNS.with(|c| *c.borrow());
    Ok(format!(
        "{total} checked runs ({extra} dedicated), every accepted round had >= f+1 honest ACCEPTs"
    ))
}

fn main() -> ExitCode {
    // Quorum safety is asserted inside every run, so it reports last.
    let criteria: Vec<Criterion> = vec![
        (1, "clean workload acceptance", c1_table_one),
        (2, "corrupt workload rejection", c2_table_two),
        (3, "coverage 4/4 within 3 hops", c3_coverage),
        (4, "expected coverage formula", c4_expected_coverage),
        (5, "Byzantine-node tolerance", c5_byzantine_tolerance),
        (7, "scalability sweep", c7_sweep),
        (8, "virtual latency", c8_virtual_latency),
        (9, "determinism", c9_determinism),
        (6, "quorum safety", c6_quorum_safety),
    ];
    let mut results = BTreeMap::new();
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        results.insert(id, (name, outcome));
    }
    let mut failed = 0;
    for (id, (name, outcome)) in &results {
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
