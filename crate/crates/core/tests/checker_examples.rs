mod common;

use std::collections::BTreeSet;

use byztame::checker::{
    check, check_ops, generate_candidates, Candidate, CheckInput, ObjectKind, SnapshotSpec, TransferSpec,
    Verdict,
};
use byztame::scenario::{builtin, execute, parse};
use byztame::sim::{Call, Hint, Operation, ProcessId, Ret, TraceMode};
use common::histgen::random_case;
use common::oracle::{classical_linearizable, Model};

fn p(i: u32) -> ProcessId {
    ProcessId::new(i)
}

fn b(s: &str) -> Vec<u8> {
    s.as_bytes().to_vec()
}

fn op(process: u32, call: Call, ret: Ret, invoked: u64, responded: u64) -> Operation {
    Operation {
        process: p(process),
        call,
        ret: Some(ret),
        invoked,
        responded: Some(responded),
    }
}

#[test]
fn no_byzantine_values_means_no_candidates() {
    let ops = [
        op(
            1,
            Call::Deliver { from: p(2), ts: 1 },
            Ret::Value(Some(b("x"))),
            1,
            2,
        ),
        op(1, Call::Snapshot, Ret::Array(vec![Some((1, b("v"))), None]), 3, 4),
    ];
    for kind in [
        ObjectKind::Rbcast,
        ObjectKind::Snapshot { n: 2 },
        ObjectKind::Register,
    ] {
        assert!(generate_candidates(&kind, &ops, &BTreeSet::new(), &[]).is_empty());
    }
    // A Byzantine process whose values never show up contributes nothing.
    let byz = BTreeSet::from([p(3)]);
    assert!(generate_candidates(&ObjectKind::Rbcast, &ops, &byz, &[]).is_empty());
}

#[test]
fn delivered_byzantine_value_yields_broadcast_candidate() {
    let ops = [
        op(
            1,
            Call::Deliver { from: p(2), ts: 1 },
            Ret::Value(Some(b("x"))),
            1,
            2,
        ),
        op(
            3,
            Call::Deliver { from: p(2), ts: 1 },
            Ret::Value(Some(b("x"))),
            1,
            2,
        ),
        op(3, Call::Deliver { from: p(2), ts: 2 }, Ret::Value(None), 3, 4),
    ];
    let got = generate_candidates(&ObjectKind::Rbcast, &ops, &BTreeSet::from([p(2)]), &[]);
    assert_eq!(
        got,
        vec![Candidate {
            process: p(2),
            call: Call::Broadcast { ts: 1, val: b("x") }
        }]
    );
}

#[test]
fn returned_byzantine_coordinate_yields_update_candidate() {
    let ops = [op(
        1,
        Call::Snapshot,
        Ret::Array(vec![None, Some((3, b("y")))]),
        1,
        2,
    )];
    let got = generate_candidates(&ObjectKind::Snapshot { n: 2 }, &ops, &BTreeSet::from([p(2)]), &[]);
    assert_eq!(
        got,
        vec![Candidate {
            process: p(2),
            call: Call::Update(b("y"))
        }]
    );
}

#[test]
fn applied_byzantine_records_yield_transfer_candidates() {
    let t = |src: u32, dst: u32| Call::Transfer {
        src: p(src),
        dst: p(dst),
        amount: 1,
    };
    let hints = [
        Hint {
            process: p(3),
            call: t(3, 1),
            seq: 1,
        },
        Hint {
            process: p(3),
            call: t(3, 1),
            seq: 1,
        },
        Hint {
            process: p(3),
            call: t(3, 2),
            seq: 2,
        },
        // Hints from correct processes and records of another source are ignored.
        Hint {
            process: p(1),
            call: t(1, 2),
            seq: 1,
        },
        Hint {
            process: p(3),
            call: t(2, 1),
            seq: 3,
        },
    ];
    let kind = ObjectKind::Transfer {
        initial: vec![0, 0, 2],
    };
    let got = generate_candidates(&kind, &[], &BTreeSet::from([p(3)]), &hints);
    let calls: Vec<Call> = got.into_iter().map(|c| c.call).collect();
    assert_eq!(calls, vec![t(3, 1), t(3, 2)]);
}

/// Two correct updates overlap two correct snapshots. Snapshot 1 sees only
/// x; snapshot 2 sees only y (incomparable) or both (comparable).
fn snapshot_fixture(second: Vec<Option<(u64, Vec<u8>)>>) -> Vec<Operation> {
    vec![
        op(1, Call::Update(b("x")), Ret::Ack, 1, 10),
        op(2, Call::Update(b("y")), Ret::Ack, 1, 10),
        op(
            3,
            Call::Snapshot,
            Ret::Array(vec![Some((1, b("x"))), None, None, None]),
            2,
            9,
        ),
        op(4, Call::Snapshot, Ret::Array(second), 2, 9),
    ]
}

#[test]
fn snapshot_fixture_pair() {
    let spec = SnapshotSpec { n: 4 };
    let kind = ObjectKind::Snapshot { n: 4 };
    let comparable = snapshot_fixture(vec![Some((1, b("x"))), Some((1, b("y"))), None, None]);
    let incomparable = snapshot_fixture(vec![None, Some((1, b("y"))), None, None]);
    assert!(classical_linearizable(&kind, &comparable));
    assert!(!classical_linearizable(&kind, &incomparable));
    assert!(check_ops(&spec, &comparable, &[], 0, 100_000).is_linearizable());
    let Verdict::Violation { ops } = check_ops(&spec, &incomparable, &[], 0, 100_000) else {
        panic!("incomparable snapshots accepted");
    };
    // The reported subset fails on its own and every one-smaller subset passes.
    assert!(!classical_linearizable(&kind, &ops));
    for i in 0..ops.len() {
        let mut fewer = ops.clone();
        fewer.remove(i);
        assert!(classical_linearizable(&kind, &fewer), "not 1-minimal: {ops:?}");
    }
}

#[test]
fn unfunded_success_is_rejected() {
    let spec = TransferSpec { initial: vec![0, 0] };
    let ops = [op(
        1,
        Call::Transfer {
            src: p(1),
            dst: p(2),
            amount: 1,
        },
        Ret::Bool(true),
        1,
        2,
    )];
    assert!(check_ops(&spec, &ops, &[], 0, 1_000).is_violation());
    let ops = [op(
        1,
        Call::Transfer {
            src: p(1),
            dst: p(2),
            amount: 1,
        },
        Ret::Bool(false),
        1,
        2,
    )];
    assert!(check_ops(&spec, &ops, &[], 0, 1_000).is_linearizable());
}

/// A witness must replay through an independent model with every recorded
/// response accepted.
fn replays(kind: &ObjectKind, witness: &[byztame::checker::WitnessStep]) -> bool {
    let mut m = Model::new(kind);
    witness.iter().all(|s| {
        m.run(kind, s.process, &s.call)
            .is_some_and(|r| match (&r, &s.ret) {
                (Ret::Array(a), Ret::Array(w)) => a
                    .iter()
                    .map(|e| e.as_ref().map(|x| &x.1))
                    .eq(w.iter().map(|e| e.as_ref().map(|x| &x.1))),
                _ => r == s.ret,
            })
    })
}

#[test]
fn verdicts_and_witnesses_are_deterministic_and_replay() {
    let mut witnessed = 0;
    for seed in 0..150 {
        let case = random_case(seed, seed % 2 == 0);
        let input = CheckInput::new(case.kind.clone(), case.history.clone()).budget(case.budget);
        let a = check(&input).unwrap();
        let b = check(&input).unwrap();
        assert_eq!(a.verdict, b.verdict, "seed {seed}");
        assert_eq!(a.candidates, b.candidates, "seed {seed}");
        if let Verdict::Linearizable { witness } = &a.verdict {
            assert!(
                replays(&case.kind, witness),
                "seed {seed}: witness does not replay"
            );
            witnessed += 1;
        }
    }
    assert!(witnessed > 50);
}

#[test]
fn recorded_run_checks_identically_twice() {
    for name in ["snapshot-order", "rbcast-happy", "transfer-race"] {
        let s = parse(builtin(name).unwrap()).unwrap().with_seed(5);
        let report = execute(&s, TraceMode::Off).unwrap();
        let input = CheckInput::new(report.kind.clone(), report.outcome.history.clone());
        let a = check(&input).unwrap();
        let b = check(&input).unwrap();
        assert!(a.verdict.is_linearizable(), "{name}: {a}");
        assert_eq!(a.verdict, b.verdict, "{name}");
    }
}

#[test]
fn node_limit_gives_inconclusive_not_a_verdict() {
    let kind = ObjectKind::Snapshot { n: 4 };
    let ops = snapshot_fixture(vec![None, Some((1, b("y"))), None, None]);
    // Every operation overlaps every other: all invocations, then all
    // responses.
    let mut history = byztame::sim::History::default();
    for (i, o) in ops.iter().enumerate() {
        history.invoke(o.process, o.call.clone(), i as u64 + 1);
    }
    for (i, o) in ops.iter().enumerate() {
        history.respond(o.process, o.ret.clone().unwrap(), i as u64 + 10);
    }
    let mut input = CheckInput::new(kind, history);
    input.node_limit = 1;
    let r = check(&input).unwrap();
    assert!(matches!(r.verdict, Verdict::Inconclusive { .. }), "{r}");
    assert!(r.to_string().starts_with("verdict=inconclusive-budget"));
}
