//! Scenario files: a system configuration, a workload, adversaries and
//! expectations, run on the simulator and judged afterwards.

mod builtin;
mod expect;
mod format;
mod run;

pub use builtin::{builtin, BUILTINS};
pub use expect::{evaluate, ExpectResult};
pub use format::{parse, parse_with_default, ScenarioError};
pub use run::{execute, Observations, RunReport, SnapReturn, UpdateDone};

use crate::checker::ObjectKind;
use crate::sim::{Call, ProcessId, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Object {
    Register,
    Rbcast,
    Snapshot,
    Transfer,
}

impl Object {
    pub fn name(self) -> &'static str {
        match self {
            Object::Register => "register",
            Object::Rbcast => "rbcast",
            Object::Snapshot => "snapshot",
            Object::Transfer => "asset-transfer",
        }
    }
}

/// One workload operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSpec {
    pub process: ProcessId,
    pub call: Call,
    /// Earliest step at which the operation may be invoked.
    pub at: u64,
    /// 1-based index of a workload operation that must complete first.
    pub after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    CrashSilent,
    RegisterReset,
    /// Equivocating rbcast sender: every value under every stamp.
    Equivocate {
        stamps: Vec<u64>,
        values: Vec<Vec<u8>>,
    },
    /// Byzantine snapshot participant with two values.
    Twisted {
        values: [Vec<u8>; 2],
    },
    /// Byzantine asset-transfer source publishing `(seq, dst, amount)`.
    Overspend {
        records: Vec<(u64, ProcessId, u64)>,
    },
    /// Byzantine register writer cycling through values.
    Scribble {
        values: Vec<Vec<u8>>,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::CrashSilent => "crash-silent",
            Strategy::RegisterReset => "register-reset",
            Strategy::Equivocate { .. } => "equivocate",
            Strategy::Twisted { .. } => "twisted",
            Strategy::Overspend { .. } => "overspend",
            Strategy::Scribble { .. } => "scribble",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySpec {
    pub process: ProcessId,
    pub strategy: Strategy,
    /// Corruption takes effect at the start of this step (0 = from the start).
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    /// Every correct workload operation completed.
    AllComplete,
    /// No correct operation with this name ever completed.
    NeverCompletes(String),
    /// The correct-process history is Byzantine linearizable.
    CheckerPass,
    /// No online or final invariant check fired.
    Invariants,
    /// No two correct processes delivered different values for one
    /// broadcast slot.
    Agreement,
    /// Returned snapshots are pairwise comparable and respect real time.
    SnapshotOrder,
    /// Completed updates are visible to later snapshots, transitively.
    SnapshotVisibility,
    /// Settled balances conserve money, and each record is applied in one
    /// form only.
    Conservation,
    /// No correct balance read returned this amount.
    NeverReads(u64),
    /// Exactly this many correct transfers returned true.
    TrueTransfers(usize),
}

impl Expectation {
    pub fn name(&self) -> String {
        match self {
            Expectation::AllComplete => "all-complete".into(),
            Expectation::NeverCompletes(op) => format!("never-completes({op})"),
            Expectation::CheckerPass => "checker-pass".into(),
            Expectation::Invariants => "invariants".into(),
            Expectation::Agreement => "agreement".into(),
            Expectation::SnapshotOrder => "snapshot-order".into(),
            Expectation::SnapshotVisibility => "snapshot-visibility".into(),
            Expectation::Conservation => "conservation".into(),
            Expectation::NeverReads(v) => format!("never-reads({v})"),
            Expectation::TrueTransfers(k) => format!("true-transfers({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub object: Object,
    pub config: SystemConfig,
    pub initial: Vec<u64>,
    /// Steps to keep running after the workload is done.
    pub drain: u64,
    /// Most hypothesized Byzantine operations the checker may use.
    pub budget: usize,
    pub ops: Vec<OpSpec>,
    pub adversaries: Vec<AdversarySpec>,
    pub expect: Vec<Expectation>,
}

impl Scenario {
    pub fn kind(&self) -> ObjectKind {
        match self.object {
            Object::Register => ObjectKind::Register,
            Object::Rbcast => ObjectKind::Rbcast,
            Object::Snapshot => ObjectKind::Snapshot { n: self.config.n },
            Object::Transfer => ObjectKind::Transfer {
                initial: self.initial.clone(),
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self
    }
}
