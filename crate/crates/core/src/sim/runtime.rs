//! Single-threaded executor.
//!
//! Each process is an `async` task. Every register access first yields, so a
//! task parked at an access resumes, performs exactly that access, computes
//! locally and parks again at its next access. One scheduler step therefore
//! polls one task once and moves exactly one register access (or, if the
//! poll touched no register, one local transition).

use std::cell::{Ref, RefCell};
use std::collections::BTreeMap;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::sim::{
    Action, Authority, Behavior, Call, Corruption, Fabric, Hint, History, Label, Monitor, ProcessId, Ret,
    Scheduler, SignedValue, SimError, SystemConfig, Trace, TraceMode, Value, Violation, WriteEvent,
};

pub type LocalTask = Pin<Box<dyn Future<Output = ()>>>;

/// Global simulation state shared by every process of one run.
#[derive(Debug)]
pub struct World {
    cfg: SystemConfig,
    step: u64,
    fabric: Fabric,
    auth: Authority,
    trace: Trace,
    history: History,
    corrupted: BTreeMap<ProcessId, u64>,
    violations: Vec<Violation>,
    current: Option<ProcessId>,
    accessed: bool,
}

impl World {
    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    /// The step being executed (or last executed).
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn authority(&self) -> &Authority {
        &self.auth
    }

    pub fn verify(&self, sv: &SignedValue) -> bool {
        self.auth.verify(sv)
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn is_corrupted(&self, p: ProcessId) -> bool {
        self.corrupted.contains_key(&p)
    }

    pub fn corrupted(&self) -> &BTreeMap<ProcessId, u64> {
        &self.corrupted
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    fn begin_access(&mut self, who: ProcessId) {
        debug_assert_eq!(self.current, Some(who), "access outside the process's own step");
        assert!(
            !self.accessed,
            "process {who} performed two register accesses in step {}",
            self.step
        );
        self.accessed = true;
    }
}

/// Parks the calling task until its next scheduled step.
struct Yield(bool);

impl Future for Yield {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        if self.0 {
            Poll::Ready(())
        } else {
            self.0 = true;
            Poll::Pending
        }
    }
}

type Monitors = Rc<RefCell<Vec<Box<dyn Monitor>>>>;

/// A process's handle on the world.
#[derive(Clone)]
pub struct Ctx {
    pid: ProcessId,
    world: Rc<RefCell<World>>,
    monitors: Monitors,
}

impl Ctx {
    pub fn id(&self) -> ProcessId {
        self.pid
    }

    pub fn n(&self) -> usize {
        self.world.borrow().cfg.n
    }

    pub fn f(&self) -> usize {
        self.world.borrow().cfg.f
    }

    pub fn step(&self) -> u64 {
        self.world.borrow().step
    }

    pub fn world(&self) -> Ref<'_, World> {
        self.world.borrow()
    }

    pub fn is_corrupted(&self) -> bool {
        self.world.borrow().is_corrupted(self.pid)
    }

    /// Atomic read of `owner`'s register `label`. One step.
    pub async fn read(&self, owner: ProcessId, label: &Label) -> Value {
        Yield(false).await;
        let mut w = self.world.borrow_mut();
        w.begin_access(self.pid);
        let value = w.fabric.read(owner, label);
        let byz = w.is_corrupted(self.pid);
        let step = w.step;
        w.trace
            .record(step, self.pid, Action::Read, owner, Some(label), &value, byz);
        value
    }

    /// Atomic write of this process's own register `label`. One step.
    pub async fn write(&self, label: Label, value: Value) {
        Yield(false).await;
        let (old, byz, step) = {
            let mut w = self.world.borrow_mut();
            w.begin_access(self.pid);
            let byz = w.is_corrupted(self.pid);
            let step = w.step;
            w.trace
                .record(step, self.pid, Action::Write, self.pid, Some(&label), &value, byz);
            let old = w
                .fabric
                .write(self.pid, self.pid, &label, value.clone())
                .expect("own register");
            (old, byz, step)
        };
        let mut monitors = self.monitors.borrow_mut();
        if monitors.is_empty() {
            return;
        }
        let event = WriteEvent {
            step,
            writer: self.pid,
            label: &label,
            old: &old,
            new: &value,
            byzantine: byz,
        };
        let mut found = Vec::new();
        {
            let w = self.world.borrow();
            for m in monitors.iter_mut() {
                m.on_write(&event, &w, &mut found);
            }
        }
        self.world.borrow_mut().violations.extend(found);
    }

    /// Spends one step without touching a register.
    pub async fn pause(&self) {
        Yield(false).await;
    }

    /// Signs `payload` as this process. Local; consumes no step.
    pub fn sign(&self, payload: Value) -> SignedValue {
        self.sign_as(self.pid, payload)
            .expect("a process may always sign as itself")
    }

    /// Asks the authority for a signature as `signer`. Fails unless `signer`
    /// is this process.
    pub fn sign_as(&self, signer: ProcessId, payload: Value) -> Result<SignedValue, SimError> {
        let mut w = self.world.borrow_mut();
        let step = w.step;
        let sv = w.auth.sign(self.pid, signer, payload, step)?;
        let byz = w.is_corrupted(self.pid);
        if w.trace.mode() == TraceMode::Full {
            let payload = sv.payload().clone();
            w.trace
                .record(step, self.pid, Action::Sign, signer, None, &payload, byz);
        }
        Ok(sv)
    }

    pub fn verify(&self, sv: &SignedValue) -> bool {
        self.world.borrow().auth.verify(sv)
    }

    /// Records the invocation of an object operation. One local step.
    pub async fn invoke(&self, call: Call) {
        Yield(false).await;
        let mut w = self.world.borrow_mut();
        let step = w.step;
        w.history.invoke(self.pid, call, step);
    }

    /// Records the response of the pending operation. One local step.
    pub async fn respond(&self, ret: Ret) {
        Yield(false).await;
        let mut w = self.world.borrow_mut();
        let step = w.step;
        w.history.respond(self.pid, ret, step);
    }

    /// Records an object-level observation of Byzantine behaviour.
    pub fn hint(&self, hint: Hint) {
        let mut w = self.world.borrow_mut();
        if !w.history.hints.contains(&hint) {
            w.history.hints.push(hint);
        }
    }

    /// Reports an invariant violation found by protocol-local checks.
    pub fn report(&self, check: &'static str, detail: String) {
        let mut w = self.world.borrow_mut();
        let step = w.step;
        w.violations.push(Violation { step, check, detail });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// The stop predicate held.
    Stopped,
    /// `max_steps` steps ran without the stop predicate holding.
    BudgetExhausted,
    /// No process had anything left to do.
    Quiescent,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Stopped => "stopped",
            RunStatus::BudgetExhausted => "budget-exhausted",
            RunStatus::Quiescent => "quiescent",
        }
    }
}

/// Plain-data result of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub steps: u64,
    pub history: History,
    pub corrupted: BTreeMap<ProcessId, u64>,
    pub violations: Vec<Violation>,
    pub trace: String,
    pub trace_lines: usize,
    pub fingerprint: u64,
}

pub struct Simulation {
    world: Rc<RefCell<World>>,
    monitors: Monitors,
    tasks: Vec<Option<LocalTask>>,
    sched: Scheduler,
    pending: Vec<Corruption>,
    budgeted: Vec<ProcessId>,
}

impl Simulation {
    pub fn new(cfg: SystemConfig, mode: TraceMode) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut sched = Scheduler::new(cfg.n, cfg.seed, cfg.fairness_window);
        let n = cfg.n;
        let world = World {
            cfg,
            step: 0,
            fabric: Fabric::new(),
            auth: Authority::new(),
            trace: Trace::new(mode),
            history: History::default(),
            corrupted: BTreeMap::new(),
            violations: Vec::new(),
            current: None,
            accessed: false,
        };
        // Processes without a task do not run until one is spawned.
        for p in ProcessId::all(n) {
            sched.halt(p);
        }
        Ok(Simulation {
            world: Rc::new(RefCell::new(world)),
            monitors: Rc::new(RefCell::new(Vec::new())),
            tasks: (0..n).map(|_| None).collect(),
            sched,
            pending: Vec::new(),
            budgeted: Vec::new(),
        })
    }

    pub fn config(&self) -> SystemConfig {
        self.world.borrow().cfg.clone()
    }

    pub fn ctx(&self, p: ProcessId) -> Ctx {
        assert!(p.index() < self.tasks.len(), "process {p} out of range");
        Ctx {
            pid: p,
            world: Rc::clone(&self.world),
            monitors: Rc::clone(&self.monitors),
        }
    }

    pub fn world(&self) -> Ref<'_, World> {
        self.world.borrow()
    }

    /// Installs `task` as `p`'s program.
    pub fn spawn(&mut self, p: ProcessId, task: LocalTask) {
        self.tasks[p.index()] = Some(task);
        let step = self.world.borrow().step;
        let fair = !self.world.borrow().is_corrupted(p);
        self.sched.revive(p, step, fair);
    }

    pub fn add_monitor(&mut self, monitor: Box<dyn Monitor>) {
        self.monitors.borrow_mut().push(monitor);
    }

    /// Registers a corruption. At most `f` distinct processes may be targeted.
    pub fn corrupt(&mut self, corruption: Corruption) -> Result<(), SimError> {
        let p = corruption.process;
        let f = self.world.borrow().cfg.f;
        ProcessId::checked(p.get(), self.tasks.len())?;
        if !self.budgeted.contains(&p) {
            if self.budgeted.len() >= f {
                return Err(SimError::FaultBudget { process: p, f });
            }
            self.budgeted.push(p);
        }
        self.pending.push(corruption);
        Ok(())
    }

    fn apply_corruptions(&mut self, step: u64) {
        if self.pending.is_empty() {
            return;
        }
        let mut i = 0;
        while i < self.pending.len() {
            let fires = {
                let w = self.world.borrow();
                !w.is_corrupted(self.pending[i].process) && self.pending[i].trigger.fires(step, &w)
            };
            if !fires {
                i += 1;
                continue;
            }
            let c = self.pending.remove(i);
            let p = c.process;
            {
                let mut w = self.world.borrow_mut();
                w.corrupted.insert(p, step);
                w.history.corrupted.insert(p, step);
            }
            self.tasks[p.index()] = None;
            match c.behavior {
                Behavior::Silent => self.sched.halt(p),
                Behavior::Run(make) => {
                    let task = make(self.ctx(p));
                    self.tasks[p.index()] = Some(task);
                    // The process may have had no task of its own.
                    self.sched.revive(p, step, false);
                }
            }
        }
    }

    /// Runs one scheduler step. Returns the process that ran, or `None` if
    /// nothing is runnable.
    pub fn step(&mut self) -> Option<ProcessId> {
        let step = self.world.borrow().step + 1;
        self.apply_corruptions(step);
        let p = self.sched.pick(step)?;
        {
            let mut w = self.world.borrow_mut();
            w.step = step;
            w.current = Some(p);
            w.accessed = false;
        }
        let task = self.tasks[p.index()]
            .as_mut()
            .expect("runnable process has a task");
        let mut cx = Context::from_waker(Waker::noop());
        let done = task.as_mut().poll(&mut cx).is_ready();
        if done {
            self.tasks[p.index()] = None;
            self.sched.halt(p);
        }
        let mut w = self.world.borrow_mut();
        if !w.accessed {
            let byz = w.is_corrupted(p);
            w.trace
                .record(step, p, Action::Local, p, None, &Value::Bottom, byz);
        }
        w.current = None;
        Some(p)
    }

    /// Steps until `stop` holds, nothing is runnable, or the step budget is
    /// spent.
    pub fn run(&mut self, mut stop: impl FnMut(&World) -> bool) -> RunStatus {
        let max = self.world.borrow().cfg.max_steps;
        loop {
            if stop(&self.world.borrow()) {
                return RunStatus::Stopped;
            }
            if self.world.borrow().step >= max {
                return RunStatus::BudgetExhausted;
            }
            if self.step().is_none() {
                return RunStatus::Quiescent;
            }
        }
    }

    /// Drops every task, runs final monitor sweeps and extracts the results.
    pub fn finish(mut self, status: RunStatus) -> RunOutcome {
        self.tasks.clear();
        let mut found = Vec::new();
        {
            let w = self.world.borrow();
            for m in self.monitors.borrow_mut().iter_mut() {
                m.on_finish(&w, &mut found);
            }
        }
        let mut w = self.world.borrow_mut();
        w.violations.extend(found);
        let trace = std::mem::take(&mut w.trace);
        RunOutcome {
            status,
            steps: w.step,
            history: std::mem::take(&mut w.history),
            corrupted: w.corrupted.clone(),
            violations: std::mem::take(&mut w.violations),
            trace_lines: trace.len(),
            fingerprint: trace.fingerprint(),
            trace: trace.into_text(),
        }
    }
}
