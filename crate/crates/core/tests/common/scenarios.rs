//! Seeded scenario texts for the property runs. Byzantine processes rotate
//! with the seed, and every other seed corrupts adaptively mid-run.

use std::fmt::Write;

use byztame::scenario::{parse, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// `f` consecutive processes starting at a seed-dependent offset.
pub fn byzantine(n: usize, f: usize, seed: u64) -> Vec<usize> {
    (0..f).map(|k| (seed as usize + k) % n + 1).collect()
}

fn header(out: &mut String, name: &str, object: &str, n: usize, f: usize, seed: u64, max_steps: u64) {
    writeln!(out, "name = {name}").unwrap();
    writeln!(out, "object = {object}").unwrap();
    writeln!(out, "n = {n}\nf = {f}\nseed = {seed}\nmax_steps = {max_steps}").unwrap();
}

fn op(out: &mut String, p: usize, call: &str, after: Option<usize>, at: u64) {
    writeln!(out, "\n[op]\np = {p}\ncall = {call}").unwrap();
    if let Some(a) = after {
        writeln!(out, "after = {a}").unwrap();
    }
    if at > 0 {
        writeln!(out, "at = {at}").unwrap();
    }
}

fn adversary(out: &mut String, p: usize, at: u64, body: &str) {
    writeln!(out, "\n[adversary]\np = {p}\nat = {at}\n{body}").unwrap();
}

fn expect(out: &mut String, names: &[&str]) {
    writeln!(out, "\n[expect]").unwrap();
    for e in names {
        writeln!(out, "{e}").unwrap();
    }
}

fn build(text: String) -> Scenario {
    parse(&text).unwrap_or_else(|e| panic!("generated scenario does not parse: {e}\n{text}"))
}

/// Every process broadcasts and then tries to deliver everyone's slot 1;
/// the Byzantine ones equivocate on stamps 1 and 2.
pub fn rbcast_safety(n: usize, f: usize, seed: u64) -> Scenario {
    let mut r = rng(seed, 1);
    let mut t = String::new();
    header(
        &mut t,
        &format!("rbcast-safety-n{n}"),
        "rbcast",
        n,
        f,
        seed,
        200_000,
    );
    writeln!(t, "drain = 300").unwrap();
    let mut idx = 0;
    for p in 1..=n {
        idx += 1;
        let own = idx;
        op(&mut t, p, &format!("broadcast 1 v{p}"), None, r.gen_range(0..50));
        for j in (1..=n).filter(|&j| j != p) {
            idx += 1;
            op(&mut t, p, &format!("deliver {j} 1"), Some(own), 0);
        }
    }
    for b in byzantine(n, f, seed) {
        let at = if seed.is_multiple_of(2) {
            0
        } else {
            r.gen_range(1..400)
        };
        adversary(
            &mut t,
            b,
            at,
            "strategy = equivocate\nstamps = 1, 2\nvalues = a, b",
        );
    }
    expect(&mut t, &["agreement", "invariants", "checker-pass"]);
    build(t)
}

/// Correct processes broadcast once; the Byzantine ones stop taking steps.
pub fn rbcast_liveness(n: usize, f: usize, seed: u64, max_steps: u64, expect_done: bool) -> Scenario {
    let mut r = rng(seed, 2);
    let mut t = String::new();
    let name = if expect_done {
        "rbcast-liveness"
    } else {
        "rbcast-boundary"
    };
    header(&mut t, &format!("{name}-n{n}"), "rbcast", n, f, seed, max_steps);
    let byz = byzantine(n, f, seed);
    for p in (1..=n).filter(|p| !byz.contains(p)) {
        op(&mut t, p, &format!("broadcast 1 v{p}"), None, r.gen_range(0..50));
    }
    for b in byz {
        adversary(&mut t, b, 0, "strategy = crash-silent");
    }
    if expect_done {
        expect(
            &mut t,
            &["all-complete", "agreement", "invariants", "checker-pass"],
        );
    } else {
        expect(&mut t, &["never-completes = broadcast", "invariants"]);
    }
    build(t)
}

/// Two updates and two snapshots per process, with staggered starts,
/// against `f` twisted Byzantine participants.
pub fn snapshot_mix(n: usize, f: usize, seed: u64) -> Scenario {
    let mut r = rng(seed, 3);
    let mut t = String::new();
    header(
        &mut t,
        &format!("snapshot-mix-n{n}"),
        "snapshot",
        n,
        f,
        seed,
        200_000,
    );
    for p in 1..=n {
        let start = r.gen_range(0..300);
        let calls = if r.gen_bool(0.5) {
            ["update x", "snapshot", "update y", "snapshot"]
        } else {
            ["snapshot", "update x", "snapshot", "update y"]
        };
        for (k, c) in calls.iter().enumerate() {
            let call = c.replace('x', &format!("p{p}a")).replace('y', &format!("p{p}b"));
            op(&mut t, p, &call, None, if k == 0 { start } else { 0 });
        }
    }
    for b in byzantine(n, f, seed) {
        let at = if seed.is_multiple_of(2) {
            0
        } else {
            r.gen_range(1..1500)
        };
        adversary(&mut t, b, at, "strategy = twisted\nvalues = u, w");
    }
    expect(
        &mut t,
        &[
            "all-complete",
            "snapshot-order",
            "snapshot-visibility",
            "invariants",
            "checker-pass",
        ],
    );
    build(t)
}

/// Random transfers and reads with a Byzantine source publishing
/// conflicting records.
pub fn transfer_mix(seed: u64) -> Scenario {
    let (n, f) = (4, 1);
    let mut r = rng(seed, 4);
    let mut t = String::new();
    header(&mut t, "transfer-mix", "asset-transfer", n, f, seed, 200_000);
    let initial: Vec<String> = (0..n).map(|_| r.gen_range(0..=3).to_string()).collect();
    writeln!(t, "initial = {}", initial.join(", ")).unwrap();
    let byz = byzantine(n, f, seed)[0];
    for p in (1..=n).filter(|&p| p != byz) {
        for _ in 0..r.gen_range(1..=3) {
            let dst = loop {
                let d = r.gen_range(1..=n);
                if d != p {
                    break d;
                }
            };
            if r.gen_bool(0.7) {
                op(
                    &mut t,
                    p,
                    &format!("transfer {dst} {}", r.gen_range(1..=2)),
                    None,
                    0,
                );
            } else {
                op(&mut t, p, &format!("read {dst}"), None, 0);
            }
        }
    }
    let recs: Vec<String> = (0..r.gen_range(1..=3))
        .map(|_| {
            let seq = r.gen_range(1..=2);
            let dst = (byz % n) + 1;
            format!("{seq}:{dst}:{}", r.gen_range(1..=2))
        })
        .collect();
    adversary(
        &mut t,
        byz,
        if seed.is_multiple_of(2) {
            0
        } else {
            r.gen_range(1..500)
        },
        &format!("strategy = overspend\nrecords = {}", recs.join(", ")),
    );
    expect(
        &mut t,
        &["all-complete", "conservation", "invariants", "checker-pass"],
    );
    build(t)
}

/// A Byzantine account holding one coin signs two records with the same
/// sequence number to two different processes; both then try to pass the
/// coin on. Exactly one can succeed.
pub fn double_spend(seed: u64) -> Scenario {
    let mut t = String::new();
    header(&mut t, "double-spend", "asset-transfer", 4, 1, seed, 200_000);
    writeln!(t, "initial = 0, 0, 0, 1").unwrap();
    op(&mut t, 2, "transfer 1 1", None, 400);
    op(&mut t, 3, "transfer 1 1", None, 400);
    op(&mut t, 1, "read 1", Some(1), 0);
    adversary(&mut t, 4, 0, "strategy = overspend\nrecords = 1:2:1, 1:3:1");
    expect(
        &mut t,
        &["all-complete", "true-transfers = 1", "conservation", "invariants"],
    );
    build(t)
}

/// One account with `coins` units makes `attempts` unit transfers while the
/// receivers read its balance.
pub fn funded_race(coins: u64, attempts: usize, seed: u64) -> Scenario {
    let mut r = rng(seed, 5);
    let mut t = String::new();
    header(&mut t, "funded-race", "asset-transfer", 3, 1, seed, 200_000);
    writeln!(t, "initial = {coins}, 0, 0").unwrap();
    for _ in 0..attempts {
        op(&mut t, 1, &format!("transfer {} 1", r.gen_range(2..=3)), None, 0);
    }
    op(&mut t, 2, "read 1", None, r.gen_range(0..400));
    op(&mut t, 3, "read 1", None, r.gen_range(0..400));
    let k = coins.min(attempts as u64);
    expect(
        &mut t,
        &[
            "all-complete",
            &format!("true-transfers = {k}"),
            "conservation",
            "invariants",
            "checker-pass",
        ],
    );
    build(t)
}
