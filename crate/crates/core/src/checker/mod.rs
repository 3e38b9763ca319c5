//! Byzantine linearizability checking.
//!
//! A history passes if its correct-process projection, extended with some
//! hypothesized operations of Byzantine processes, has a linearization that
//! the object's sequential specification accepts. Hypothesized operations
//! come from `generate_candidates` and have no real-time constraints.

pub mod search;
pub mod spec;

use std::collections::BTreeSet;
use std::fmt;

use crate::sim::{Call, Hint, History, HistoryError, Operation, ProcessId, Ret};
use search::{validate_witness, Outcome, Search, MAX_SLOTS};
pub use spec::{ObjectKind, RbcastSpec, RegisterSpec, SequentialSpec, SnapshotSpec, TransferSpec};

pub const DEFAULT_BUDGET: usize = 4;
pub const DEFAULT_NODE_LIMIT: u64 = 2_000_000;

/// A hypothesized operation by a Byzantine process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub process: ProcessId,
    pub call: Call,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{} {}", self.process, self.call)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub process: ProcessId,
    pub call: Call,
    pub ret: Ret,
    pub byzantine: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Linearizable {
        witness: Vec<WitnessStep>,
    },
    /// No linearization exists; `ops` is a 1-minimal subset of the correct
    /// operations that is already not linearizable.
    Violation {
        ops: Vec<Operation>,
    },
    /// The search gave up; no claim either way.
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, Verdict::Linearizable { .. })
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, Verdict::Violation { .. })
    }
}

#[derive(Debug, Clone)]
pub struct CheckInput {
    pub kind: ObjectKind,
    pub history: History,
    pub byzantine: BTreeSet<ProcessId>,
    /// Most hypothesized operations a witness may use.
    pub budget: usize,
    /// Manually supplied candidates, tried after the generated ones.
    pub extra: Vec<Candidate>,
    pub node_limit: u64,
}

impl CheckInput {
    pub fn new(kind: ObjectKind, history: History) -> Self {
        let byzantine = history.byzantine();
        CheckInput {
            kind,
            history,
            byzantine,
            budget: DEFAULT_BUDGET,
            extra: Vec::new(),
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub kind: ObjectKind,
    pub verdict: Verdict,
    pub operations: usize,
    pub candidates: Vec<Candidate>,
    pub budget: usize,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match &self.verdict {
            Verdict::Linearizable { .. } => "linearizable",
            Verdict::Violation { .. } => "violation",
            Verdict::Inconclusive { .. } => "inconclusive-budget",
        };
        writeln!(f, "verdict={status}")?;
        writeln!(f, "object={}", self.kind)?;
        writeln!(f, "operations={}", self.operations)?;
        writeln!(f, "candidates={} budget={}", self.candidates.len(), self.budget)?;
        match &self.verdict {
            Verdict::Linearizable { witness } => {
                for step in witness {
                    let tag = if step.byzantine { " byz" } else { "" };
                    writeln!(f, "  p{} {} -> {}{tag}", step.process, step.call, step.ret)?;
                }
            }
            Verdict::Violation { ops } => {
                for op in ops {
                    let ret = op.ret.as_ref().map_or("pending".to_string(), |r| r.to_string());
                    let end = op.responded.map_or("-".to_string(), |s| s.to_string());
                    writeln!(
                        f,
                        "  p{} {} -> {ret} [{}, {end}]",
                        op.process, op.call, op.invoked
                    )?;
                }
            }
            Verdict::Inconclusive { reason } => writeln!(f, "  {reason}")?,
        }
        Ok(())
    }
}

/// The hypothesized Byzantine operations the objects' linearization
/// arguments need:
/// * rbcast: `broadcast_b(ts, v)` for each correct `deliver(b, ts) = v`;
/// * snapshot: `update_b(v)` per distinct `(ts, v)` in coordinate `b` of a
///   returned array;
/// * asset transfer: every applied transfer record of `b` (from hints);
/// * register: a `write_b(v)` for each correct read of `b`'s register that
///   returned `v`.
pub fn generate_candidates(
    kind: &ObjectKind,
    ops: &[Operation],
    byzantine: &BTreeSet<ProcessId>,
    hints: &[Hint],
) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut seen: BTreeSet<(ProcessId, u64, Vec<u8>)> = BTreeSet::new();
    for op in ops {
        match (&op.call, &op.ret) {
            (Call::Deliver { from, ts }, Some(Ret::Value(Some(v)))) if byzantine.contains(from) => {
                let c = Candidate {
                    process: *from,
                    call: Call::Broadcast {
                        ts: *ts,
                        val: v.clone(),
                    },
                };
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            (Call::Snapshot, Some(Ret::Array(entries))) if matches!(kind, ObjectKind::Snapshot { .. }) => {
                for (k, e) in entries.iter().enumerate() {
                    let b = ProcessId::from_index(k);
                    if let (true, Some((ts, v))) = (byzantine.contains(&b), e) {
                        if seen.insert((b, *ts, v.clone())) {
                            out.push(Candidate {
                                process: b,
                                call: Call::Update(v.clone()),
                            });
                        }
                    }
                }
            }
            (Call::Read(owner), Some(Ret::Value(Some(v))))
                if *kind == ObjectKind::Register && byzantine.contains(owner) =>
            {
                out.push(Candidate {
                    process: *owner,
                    call: Call::Write(v.clone()),
                });
            }
            _ => {}
        }
    }
    if matches!(kind, ObjectKind::Transfer { .. }) {
        let mut hints: Vec<&Hint> = hints.iter().filter(|h| byzantine.contains(&h.process)).collect();
        hints.sort();
        hints.dedup();
        for h in hints {
            if matches!(h.call, Call::Transfer { src, .. } if src == h.process) {
                out.push(Candidate {
                    process: h.process,
                    call: h.call.clone(),
                });
            }
        }
    }
    out
}

fn search_with<S: SequentialSpec>(
    spec: &S,
    ops: &[Operation],
    candidates: &[Candidate],
    budget: usize,
    node_limit: u64,
) -> Verdict {
    if ops.len() + candidates.len() > MAX_SLOTS {
        return Verdict::Inconclusive {
            reason: format!(
                "{} operations and {} candidates exceed the limit of {MAX_SLOTS}",
                ops.len(),
                candidates.len()
            ),
        };
    }
    match Search::new(spec, ops, candidates, budget, node_limit).run() {
        Outcome::Found(witness) => {
            assert!(
                validate_witness(spec, ops, &witness),
                "search produced an invalid witness"
            );
            Verdict::Linearizable { witness }
        }
        Outcome::Exhausted => Verdict::Violation { ops: ops.to_vec() },
        Outcome::OutOfNodes => Verdict::Inconclusive {
            reason: format!("search exceeded {node_limit} nodes"),
        },
    }
}

/// Runs the search over `ops` (correct operations only) for any spec.
pub fn check_ops<S: SequentialSpec>(
    spec: &S,
    ops: &[Operation],
    candidates: &[Candidate],
    budget: usize,
    node_limit: u64,
) -> Verdict {
    let verdict = search_with(spec, ops, candidates, budget, node_limit);
    let Verdict::Violation { .. } = verdict else {
        return verdict;
    };
    // Greedy shrink to a 1-minimal violating subset.
    let mut kept: Vec<Operation> = ops.to_vec();
    let mut shrunk = true;
    while shrunk {
        shrunk = false;
        let mut i = 0;
        while i < kept.len() {
            let mut trial = kept.clone();
            trial.remove(i);
            if search_with(spec, &trial, candidates, budget, node_limit).is_violation() {
                kept = trial;
                shrunk = true;
            } else {
                i += 1;
            }
        }
    }
    Verdict::Violation { ops: kept }
}

pub fn check(input: &CheckInput) -> Result<CheckReport, HistoryError> {
    let projected = input.history.project_correct(&input.byzantine);
    let ops = projected.operations()?;
    let mut candidates = generate_candidates(&input.kind, &ops, &input.byzantine, &input.history.hints);
    for c in &input.extra {
        if !candidates.contains(c) {
            candidates.push(c.clone());
        }
    }
    let (budget, limit) = (input.budget, input.node_limit);
    let verdict = match &input.kind {
        ObjectKind::Register => check_ops(&RegisterSpec, &ops, &candidates, budget, limit),
        ObjectKind::Rbcast => check_ops(&RbcastSpec, &ops, &candidates, budget, limit),
        ObjectKind::Snapshot { n } => check_ops(&SnapshotSpec { n: *n }, &ops, &candidates, budget, limit),
        ObjectKind::Transfer { initial } => check_ops(
            &TransferSpec {
                initial: initial.clone(),
            },
            &ops,
            &candidates,
            budget,
            limit,
        ),
    };
    Ok(CheckReport {
        kind: input.kind.clone(),
        verdict,
        operations: ops.len(),
        candidates,
        budget,
    })
}
