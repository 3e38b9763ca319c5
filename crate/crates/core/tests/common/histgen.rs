//! Random small histories for comparing the checker against the oracle.
//!
//! Responses come from a random linearization (with randomly interleaved
//! Byzantine operations), then one response is sometimes corrupted, so the
//! corpus mixes linearizable and non-linearizable cases.

use std::collections::BTreeSet;

use byztame::checker::{
    check_ops, Candidate, ObjectKind, RbcastSpec, RegisterSpec, SnapshotSpec, TransferSpec, Verdict,
};
use byztame::sim::{Call, History, Operation, ProcessId, Ret};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::Model;

pub struct Case {
    pub kind: ObjectKind,
    pub byzantine: BTreeSet<ProcessId>,
    pub history: History,
    pub candidates: Vec<Candidate>,
    pub budget: usize,
}

impl Case {
    pub fn ops(&self) -> Vec<Operation> {
        self.history
            .operations()
            .expect("generated histories are well formed")
    }
}

const VALUES: [&[u8]; 3] = [b"a", b"b", b"c"];

fn value(rng: &mut ChaCha8Rng) -> Vec<u8> {
    VALUES.choose(rng).unwrap().to_vec()
}

fn pid(rng: &mut ChaCha8Rng, n: usize) -> ProcessId {
    ProcessId::from_index(rng.gen_range(0..n))
}

fn random_call(rng: &mut ChaCha8Rng, kind: &ObjectKind, n: usize, p: ProcessId) -> Call {
    let first = rng.gen_bool(0.5);
    match kind {
        ObjectKind::Register if first => Call::Write(value(rng)),
        ObjectKind::Register => Call::Read(pid(rng, n)),
        ObjectKind::Rbcast if first => Call::Broadcast {
            ts: rng.gen_range(1..=2),
            val: value(rng),
        },
        ObjectKind::Rbcast => Call::Deliver {
            from: pid(rng, n),
            ts: rng.gen_range(1..=2),
        },
        ObjectKind::Snapshot { .. } if first => Call::Update(value(rng)),
        ObjectKind::Snapshot { .. } => Call::Snapshot,
        ObjectKind::Transfer { .. } if first => Call::Transfer {
            src: p,
            dst: pid(rng, n),
            amount: rng.gen_range(1..=2),
        },
        ObjectKind::Transfer { .. } => Call::Read(pid(rng, n)),
    }
}

/// Writer-side calls only, for hypothesized Byzantine operations.
fn random_byz_call(rng: &mut ChaCha8Rng, kind: &ObjectKind, n: usize, b: ProcessId) -> Call {
    match kind {
        ObjectKind::Register => Call::Write(value(rng)),
        ObjectKind::Rbcast => Call::Broadcast {
            ts: rng.gen_range(1..=2),
            val: value(rng),
        },
        ObjectKind::Snapshot { .. } => Call::Update(value(rng)),
        ObjectKind::Transfer { .. } => Call::Transfer {
            src: b,
            dst: pid(rng, n),
            amount: rng.gen_range(1..=2),
        },
    }
}

fn corrupt(rng: &mut ChaCha8Rng, ret: &Ret) -> Option<Ret> {
    Some(match ret {
        Ret::Ack => return None,
        Ret::Value(None) => Ret::Value(Some(value(rng))),
        Ret::Value(Some(v)) => {
            let other: Vec<&[u8]> = VALUES.iter().copied().filter(|x| *x != v.as_slice()).collect();
            if rng.gen_bool(0.3) {
                Ret::Value(None)
            } else {
                Ret::Value(Some(other.choose(rng).unwrap().to_vec()))
            }
        }
        Ret::Bool(b) => Ret::Bool(!b),
        Ret::Amount(a) => Ret::Amount(if *a == 0 || rng.gen_bool(0.5) {
            a + 1
        } else {
            a - 1
        }),
        Ret::Array(entries) => {
            let mut e = entries.clone();
            let k = rng.gen_range(0..e.len());
            e[k] = match &e[k] {
                Some(_) if rng.gen_bool(0.5) => None,
                _ => Some((1, value(rng))),
            };
            Ret::Array(e)
        }
    })
}

pub fn random_case(seed: u64, with_byzantine: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=4);
    let kind = match seed % 4 {
        0 => ObjectKind::Register,
        1 => ObjectKind::Rbcast,
        2 => ObjectKind::Snapshot { n },
        _ => ObjectKind::Transfer {
            initial: (0..n).map(|_| rng.gen_range(0..=2)).collect(),
        },
    };
    let byzantine: BTreeSet<ProcessId> = if with_byzantine {
        [pid(&mut rng, n)].into()
    } else {
        BTreeSet::new()
    };
    let correct: Vec<ProcessId> = ProcessId::all(n).filter(|p| !byzantine.contains(p)).collect();
    let total = rng.gen_range(1..=8);
    let mut queues: Vec<Vec<Call>> = vec![Vec::new(); n];
    for _ in 0..total {
        let p = *correct.choose(&mut rng).unwrap();
        let call = random_call(&mut rng, &kind, n, p);
        queues[p.index()].push(call);
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    if let Some(&b) = byzantine.iter().next() {
        for _ in 0..rng.gen_range(0..=4) {
            let c = Candidate {
                process: b,
                call: random_byz_call(&mut rng, &kind, n, b),
            };
            if !candidates.contains(&c) {
                candidates.push(c);
            }
        }
    }

    // Per process: the open operation, and its response once linearized.
    let mut open: Vec<Option<(Call, Option<Ret>)>> = vec![None; n];
    let mut unused: Vec<usize> = (0..candidates.len()).collect();
    let mut model = Model::new(&kind);
    let mut history = History::default();
    let mut step = 0u64;
    loop {
        let mut moves: Vec<(usize, u8)> = Vec::new();
        for i in 0..n {
            match &open[i] {
                None if !queues[i].is_empty() => moves.push((i, 0)),
                Some((_, None)) => moves.push((i, 1)),
                Some((_, Some(_))) => moves.push((i, 2)),
                None => {}
            }
        }
        if !unused.is_empty() {
            moves.push((usize::MAX, 3));
        }
        let Some(&(i, mv)) = moves.choose(&mut rng) else {
            break;
        };
        // Occasionally leave an operation pending forever.
        if mv == 2 && queues[i].is_empty() && rng.gen_bool(0.15) {
            open[i] = None;
            continue;
        }
        match mv {
            0 => {
                let call = queues[i].remove(0);
                step += 1;
                history.invoke(ProcessId::from_index(i), call.clone(), step);
                open[i] = Some((call, None));
            }
            1 => {
                let (call, _) = open[i].take().unwrap();
                let ret = model
                    .run(&kind, ProcessId::from_index(i), &call)
                    .expect("generated calls are allowed");
                open[i] = Some((call, Some(ret)));
            }
            2 => {
                let (_, ret) = open[i].take().unwrap();
                step += 1;
                history.respond(ProcessId::from_index(i), ret.unwrap(), step);
            }
            _ => {
                let k = unused.swap_remove(rng.gen_range(0..unused.len()));
                let c = &candidates[k];
                model.run(&kind, c.process, &c.call);
            }
        }
    }

    if rng.gen_bool(0.35) {
        let responses: Vec<usize> = history
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e.kind, byztame::sim::EventKind::Response(_)))
            .map(|(i, _)| i)
            .collect();
        if let Some(&i) = responses.choose(&mut rng) {
            if let byztame::sim::EventKind::Response(r) = &history.events[i].kind {
                if let Some(bad) = corrupt(&mut rng, r) {
                    history.events[i].kind = byztame::sim::EventKind::Response(bad);
                }
            }
        }
    }
    let budget = rng.gen_range(0..=candidates.len());
    Case {
        kind,
        byzantine,
        history,
        candidates,
        budget,
    }
}

/// The library checker on explicit candidates.
pub fn library_verdict(kind: &ObjectKind, ops: &[Operation], cands: &[Candidate], budget: usize) -> Verdict {
    let limit = byztame::checker::DEFAULT_NODE_LIMIT;
    match kind {
        ObjectKind::Register => check_ops(&RegisterSpec, ops, cands, budget, limit),
        ObjectKind::Rbcast => check_ops(&RbcastSpec, ops, cands, budget, limit),
        ObjectKind::Snapshot { n } => check_ops(&SnapshotSpec { n: *n }, ops, cands, budget, limit),
        ObjectKind::Transfer { initial } => check_ops(
            &TransferSpec {
                initial: initial.clone(),
            },
            ops,
            cands,
            budget,
            limit,
        ),
    }
}

/// Compares the library with the oracles on one case; `Err` describes a
/// disagreement.
pub fn compare(seed: u64, case: &Case) -> Result<bool, String> {
    let ops = case.ops();
    let expected = super::oracle::byzantine_linearizable(&case.kind, &ops, &case.candidates, case.budget);
    let got = library_verdict(&case.kind, &ops, &case.candidates, case.budget);
    if matches!(got, Verdict::Inconclusive { .. }) || got.is_linearizable() != expected {
        return Err(format!(
            "seed {seed}: {} history, library {}, oracle {expected}",
            case.kind,
            if got.is_linearizable() {
                "linearizable"
            } else {
                "not linearizable"
            }
        ));
    }
    if case.byzantine.is_empty() {
        let classical = super::oracle::classical_linearizable(&case.kind, &ops);
        let full = byztame::checker::check(&byztame::checker::CheckInput::new(
            case.kind.clone(),
            case.history.clone(),
        ))
        .map_err(|e| format!("seed {seed}: {e}"))?;
        if classical != expected || full.verdict.is_linearizable() != classical {
            return Err(format!(
                "seed {seed}: {} history without Byzantine processes: classical {classical}, check {}",
                case.kind,
                full.verdict.is_linearizable()
            ));
        }
    }
    Ok(expected)
}
