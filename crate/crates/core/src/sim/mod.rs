//! Deterministic simulation substrate: the register fabric, the signing
//! authority, the fair scheduler, adaptive corruption and history recording.

mod adversary;
mod auth;
mod config;
mod fabric;
mod history;
mod monitor;
mod runtime;
mod sched;
mod trace;
mod value;

pub use adversary::{register_reset, scripted_writes, Behavior, Corruption, Trigger};
pub use auth::{Authority, Issuance};
pub use config::{ProcessId, SystemConfig, DEFAULT_MAX_STEPS};
pub use fabric::Fabric;
pub use history::{
    show_bytes, ArrayEntry, Call, Event, EventKind, Hint, History, HistoryError, Operation, Ret,
};
pub use monitor::{Monitor, Violation, WriteEvent};
pub use runtime::{Ctx, LocalTask, RunOutcome, RunStatus, Simulation, World};
pub use sched::Scheduler;
pub use trace::{Action, Trace, TraceMode};
pub use value::{Instance, Label, RbVar, SignedValue, Tag, Value};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("process id {id} is outside 1..={n}")]
    BadProcess { id: u32, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("process {requester} asked for a signature as {signer}")]
    Impersonation { requester: ProcessId, signer: ProcessId },
    #[error("process {writer} wrote register {label} owned by {owner}")]
    NonOwnerWrite {
        writer: ProcessId,
        owner: ProcessId,
        label: String,
    },
    #[error("corrupting process {process} would exceed the fault budget f={f}")]
    FaultBudget { process: ProcessId, f: usize },
}
