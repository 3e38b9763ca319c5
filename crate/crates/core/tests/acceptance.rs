//! Acceptance suite. Runs every criterion at its pinned size and prints one
//! pass/fail line per criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use byztame::scenario::{builtin, execute, parse, RunReport, Scenario, BUILTINS};
use byztame::sim::TraceMode;
use common::histgen::{compare, random_case};
use common::scenarios::*;

#[derive(Default)]
struct Tally {
    runs: u64,
    checks: u64,
    failures: Vec<String>,
    note: String,
}

impl Tally {
    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }
}

#[derive(Default)]
struct Suite {
    tallies: BTreeMap<u8, Tally>,
}

/// A criterion that has failed this often stops scheduling runs, so a
/// broken build reports in minutes rather than hours.
const FAILURE_CAP: usize = 25;

impl Suite {
    fn saturated(&self, c: u8) -> bool {
        self.tallies
            .get(&c)
            .is_some_and(|t| t.failures.len() >= FAILURE_CAP)
    }

    fn get(&mut self, c: u8) -> &mut Tally {
        self.tallies.entry(c).or_default()
    }

    /// Runs `s` and files each expectation under the criterion `route`
    /// assigns to it.
    fn run(&mut self, s: &Scenario, route: impl Fn(&str) -> u8) -> RunReport {
        let report = execute(s, TraceMode::Off).expect("scenario runs");
        let mut touched: Vec<u8> = Vec::new();
        for r in &report.results {
            let base = r.name.split('(').next().unwrap_or_default();
            let c = route(base);
            let t = self.get(c);
            t.checks += 1;
            if !touched.contains(&c) {
                t.runs += 1;
                touched.push(c);
            }
            if !r.passed {
                t.fail(format!(
                    "{} seed {}: {} ({})",
                    s.name, s.config.seed, r.name, r.detail
                ));
            }
        }
        report
    }
}

/// Invariant checks always count toward the online-assertion criterion and
/// the checker toward end-to-end linearizability.
fn route(default: u8) -> impl Fn(&str) -> u8 {
    move |name| match name {
        "invariants" => 6,
        "checker-pass" => 8,
        _ => default,
    }
}

fn rbcast(suite: &mut Suite) {
    for (n, f) in [(3, 1), (5, 2)] {
        for seed in 0..1000 {
            if suite.saturated(1) {
                break;
            }
            suite.run(&rbcast_safety(n, f, seed), route(1));
        }
    }
    suite.get(1).note = "n=3,5 x 1000 seeds, equivocating writers".into();
    let mut max_steps = 0;
    for (n, f) in [(3, 1), (5, 2)] {
        for seed in 0..100 {
            if suite.saturated(2) {
                break;
            }
            let r = suite.run(&rbcast_liveness(n, f, seed, 100_000, true), |name| match name {
                "agreement" => 1,
                other => route(2)(other),
            });
            max_steps = max_steps.max(r.outcome.steps);
        }
    }
    suite.get(2).note = format!("n=2f+1, f=1,2 x 100 seeds within 1e5 steps, longest run {max_steps} steps");
    let mut max_steps = 0;
    for f in [2, 3] {
        for seed in 0..20 {
            if suite.saturated(3) {
                break;
            }
            let r = suite.run(&rbcast_liveness(2 * f, f, seed, 1_000_000, false), route(3));
            max_steps = max_steps.max(r.outcome.steps);
        }
    }
    suite.get(3).note =
        format!("n=2f, f=2,3 x 20 seeds, ran {max_steps} steps without a broadcast completing");
}

fn snapshots(suite: &mut Suite) {
    for (n, f) in [(3, 1), (5, 2)] {
        for seed in 0..500 {
            if suite.saturated(4) || suite.saturated(5) {
                break;
            }
            suite.run(&snapshot_mix(n, f, seed), |name| match name {
                "snapshot-visibility" => 5,
                other => route(4)(other),
            });
        }
    }
    suite.get(4).note = "n=3,5 x 500 seeds, f twisted participants".into();
    suite.get(5).note = "same runs; update visibility and the sees-closure".into();
}

fn checker_oracle(suite: &mut Suite) {
    let t = suite.get(7);
    let mut kinds: BTreeMap<String, u64> = BTreeMap::new();
    for seed in 0..600 {
        let case = random_case(seed, seed % 3 != 0);
        *kinds.entry(case.kind.name().to_string()).or_default() += 1;
        t.runs += 1;
        t.checks += 1;
        if let Err(e) = compare(seed, &case) {
            t.fail(e);
        }
    }
    t.note = format!("{} histories <=8 ops <=4 candidates {kinds:?}", t.runs);
}

fn transfer(suite: &mut Suite) {
    let nine = route(9);
    for seed in 0..200 {
        if suite.saturated(9) {
            return;
        }
        let s = parse(builtin("anomaly-deposit-spend").unwrap())
            .unwrap()
            .with_seed(seed);
        suite.run(&s, &nine);
    }
    for seed in 0..50 {
        let s = parse(builtin("transfer-chain").unwrap()).unwrap().with_seed(seed);
        let r = suite.run(&s, &nine);
        // The last settlement any correct process computed must show the
        // coin at its final owner.
        let last = r
            .obs
            .snapshots
            .iter()
            .zip(&r.obs.settlements)
            .max_by_key(|(s, _)| s.responded)
            .map(|(_, st)| st.balances.clone());
        let t = suite.get(9);
        t.checks += 1;
        if last.as_deref() != Some(&[0, 0, 1][..]) {
            t.fail(format!("transfer-chain seed {seed}: final balances {last:?}"));
        }
    }
    for seed in 0..100 {
        let s = parse(builtin("transfer-race").unwrap()).unwrap().with_seed(seed);
        suite.run(&s, &nine);
        suite.run(&double_spend(seed), &nine);
        suite.run(&funded_race(2, 4, seed), &nine);
    }
    for seed in 0..200 {
        let r = suite.run(&transfer_mix(seed), &nine);
        let total: u64 = r.kind_initial().iter().sum();
        let t = suite.get(9);
        for st in &r.obs.settlements {
            t.checks += 1;
            if st.balances.iter().any(|&b| b > total) {
                t.fail(format!("transfer-mix seed {seed}: balance above total {total}"));
            }
        }
    }
    suite.get(9).note = "anomaly x200, chain x50, races x300, random mixes x200".into();
}

trait InitialOf {
    fn kind_initial(&self) -> Vec<u64>;
}

impl InitialOf for RunReport {
    fn kind_initial(&self) -> Vec<u64> {
        match &self.kind {
            byztame::checker::ObjectKind::Transfer { initial } => initial.clone(),
            _ => Vec::new(),
        }
    }
}

fn determinism(suite: &mut Suite) {
    let mut scenarios: Vec<Scenario> = Vec::new();
    for (name, text) in BUILTINS {
        for seed in [0, 7, 123] {
            let mut s = parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            if name == &"boundary-n2f" {
                s.config.max_steps = 20_000;
            }
            scenarios.push(s.with_seed(seed));
        }
    }
    scenarios.push(rbcast_safety(5, 2, 11));
    scenarios.push(snapshot_mix(5, 2, 13));
    scenarios.push(transfer_mix(17));
    let t = suite.get(10);
    for s in &scenarios {
        let a = execute(s, TraceMode::Full).unwrap();
        let b = execute(s, TraceMode::Full).unwrap();
        t.runs += 1;
        t.checks += 3;
        for (what, x, y) in [
            ("trace", a.outcome.trace.clone(), b.outcome.trace.clone()),
            ("history", a.history_text(), b.history_text()),
            ("verdict", a.verdict_text(), b.verdict_text()),
        ] {
            if x != y {
                t.fail(format!(
                    "{} seed {}: {what} differs between runs",
                    s.name, s.config.seed
                ));
            }
        }
    }
    t.note = format!("{} (scenario, seed) pairs run twice with full traces", t.runs);
}

const NAMES: [&str; 10] = [
    "rbcast safety",
    "rbcast liveness",
    "resilience boundary",
    "snapshot order",
    "snapshot visibility",
    "online invariants",
    "checker oracle",
    "end-to-end linearizability",
    "asset transfer",
    "determinism",
];

fn main() -> ExitCode {
    let mut suite = Suite::default();
    let mut elapsed: BTreeMap<&str, f64> = BTreeMap::new();
    type Phase = (&'static str, fn(&mut Suite));
    let phases: [Phase; 5] = [
        ("rbcast", rbcast),
        ("snapshot", snapshots),
        ("checker", checker_oracle),
        ("transfer", transfer),
        ("determinism", determinism),
    ];
    for (name, phase) in phases {
        let start = Instant::now();
        phase(&mut suite);
        elapsed.insert(name, start.elapsed().as_secs_f64());
    }
    suite.get(6).note = "monitors on every write of every run above".into();
    suite.get(8).note = "correct histories of the n=2f+1 runs above".into();

    let mut ok = true;
    for (i, name) in NAMES.iter().enumerate() {
        let c = i as u8 + 1;
        let t = suite.get(c);
        let pass = t.failures.is_empty() && t.checks > 0;
        if t.failures.len() >= FAILURE_CAP {
            t.note
                .push_str(&format!(" (stopped after {FAILURE_CAP} failures)"));
        }
        ok &= pass;
        println!(
            "criterion {c:>2} {name:<27} {} runs={} checks={} failures={}  {}",
            if pass { "PASS" } else { "FAIL" },
            t.runs,
            t.checks,
            t.failures.len(),
            t.note
        );
        for f in t.failures.iter().take(5) {
            println!("    {f}");
        }
    }
    let times: Vec<String> = elapsed.iter().map(|(k, v)| format!("{k}={v:.1}s")).collect();
    println!("phase times: {}", times.join(" "));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
