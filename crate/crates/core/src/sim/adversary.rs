//! Adaptive corruption: when a trigger fires, the target's protocol task is
//! replaced by an adversarial one (or by nothing).

use std::fmt;
use std::rc::Rc;

use crate::sim::{Ctx, Label, LocalTask, ProcessId, Value, World};

#[derive(Clone)]
pub enum Trigger {
    /// Fires at the start of this step.
    AtStep(u64),
    /// Fires at the first step whose pre-state satisfies the predicate.
    When(Rc<dyn Fn(&World) -> bool>),
}

impl fmt::Debug for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::AtStep(t) => write!(f, "AtStep({t})"),
            Trigger::When(_) => write!(f, "When(..)"),
        }
    }
}

impl Trigger {
    pub fn fires(&self, step: u64, world: &World) -> bool {
        match self {
            Trigger::AtStep(t) => step >= *t,
            Trigger::When(pred) => pred(world),
        }
    }
}

pub enum Behavior {
    /// Takes no further steps.
    Silent,
    /// Runs the given task as the corrupted process; silent once it ends.
    Run(Box<dyn FnOnce(Ctx) -> LocalTask>),
}

impl fmt::Debug for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Behavior::Silent => write!(f, "Silent"),
            Behavior::Run(_) => write!(f, "Run(..)"),
        }
    }
}

#[derive(Debug)]
pub struct Corruption {
    pub process: ProcessId,
    pub trigger: Trigger,
    pub behavior: Behavior,
}

impl Corruption {
    pub fn new(process: ProcessId, trigger: Trigger, behavior: Behavior) -> Self {
        Corruption {
            process,
            trigger,
            behavior,
        }
    }

    pub fn silent(process: ProcessId, at_step: u64) -> Self {
        Self::new(process, Trigger::AtStep(at_step), Behavior::Silent)
    }
}

/// Restores every register the process owns to its initial value, one write
/// per step, then stops.
pub fn register_reset(ctx: Ctx) -> LocalTask {
    Box::pin(async move {
        let labels = ctx.world().fabric().owned_labels(ctx.id());
        for label in labels {
            ctx.write(label, Value::Bottom).await;
        }
    })
}

/// Performs the given writes in order, one per step, then stops.
pub fn scripted_writes(ctx: Ctx, writes: Vec<(Label, Value)>) -> LocalTask {
    Box::pin(async move {
        for (label, value) in writes {
            ctx.write(label, value).await;
        }
    })
}
