//! Online invariant checks driven by register writes.

use std::fmt;

use crate::sim::{Label, ProcessId, Value, World};

/// A single register write, handed to every monitor right after it lands.
#[derive(Debug)]
pub struct WriteEvent<'a> {
    pub step: u64,
    pub writer: ProcessId,
    pub label: &'a Label,
    pub old: &'a Value,
    pub new: &'a Value,
    /// The writer was corrupted when it wrote.
    pub byzantine: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: u64,
    pub check: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}: {}", self.step, self.check, self.detail)
    }
}

pub trait Monitor {
    fn on_write(&mut self, event: &WriteEvent<'_>, world: &World, out: &mut Vec<Violation>);

    /// Runs once after the simulation stops, with the final corrupted set.
    fn on_finish(&mut self, _world: &World, _out: &mut Vec<Violation>) {}
}
