use std::cell::{Cell, RefCell};
use std::collections::BTreeSet;
use std::rc::Rc;

use crate::checker::{check, CheckInput, CheckReport};
use crate::histfile;
use crate::rbcast::{equivocate, RbMonitor, RbNode, RbObserver};
use crate::sim::{
    register_reset, Behavior, Call, Corruption, Ctx, Instance, Label, LocalTask, ProcessId, Ret, RunOutcome,
    RunStatus, SignedValue, SimError, Simulation, TraceMode, Trigger, Value,
};
use crate::snapshot::array::view;
use crate::snapshot::{twisted, SnapMonitor, SnapNode, SnapObserver};
use crate::transfer::{overspend, settle, Settlement, TransferNode};

use super::expect::{evaluate, ExpectResult};
use super::{Expectation, Object, Scenario, Strategy};

const REGISTER: &str = "reg";
const RB_INSTANCE: &str = "rb";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub by: ProcessId,
    pub from: ProcessId,
    pub ts: u64,
    pub val: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapReturn {
    pub process: ProcessId,
    pub invoked: u64,
    pub responded: u64,
    pub array: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateDone {
    pub process: ProcessId,
    pub ts: u64,
    pub invoked: u64,
    pub responded: u64,
}

/// What the harness saw besides the recorded history. Includes the work
/// processes do while idle.
#[derive(Debug, Default)]
pub struct Observations {
    pub deliveries: Vec<Delivery>,
    pub snapshots: Vec<SnapReturn>,
    pub updates: Vec<UpdateDone>,
    /// Settlement of each snapshot in `snapshots` (asset transfer only).
    pub settlements: Vec<Settlement>,
    /// Per workload operation: completed.
    pub done: Vec<bool>,
}

#[derive(Default)]
struct Recorder(RefCell<Observations>);

impl RbObserver for Recorder {
    fn delivered(&self, by: ProcessId, _inst: &Instance, from: ProcessId, ts: u64, val: &Value) {
        self.0.borrow_mut().deliveries.push(Delivery {
            by,
            from,
            ts,
            val: val.clone(),
        });
    }
}

impl SnapObserver for Recorder {
    fn update_done(&self, process: ProcessId, ts: u64, invoked: u64, responded: u64) {
        self.0.borrow_mut().updates.push(UpdateDone {
            process,
            ts,
            invoked,
            responded,
        });
    }

    fn snapshot_done(&self, process: ProcessId, invoked: u64, responded: u64, snap: &[Value]) {
        self.0.borrow_mut().snapshots.push(SnapReturn {
            process,
            invoked,
            responded,
            array: snap.to_vec(),
        });
    }
}

/// Object-level bytes of a protocol value.
fn bytes_of(v: &Value) -> Vec<u8> {
    match v.as_bytes() {
        Some(b) => b.to_vec(),
        None => crate::codec::Encode::to_bytes(v),
    }
}

pub fn array_ret(snap: &[Value]) -> Ret {
    Ret::Array(
        view(snap)
            .into_iter()
            .map(|e| e.map(|(ts, v)| (ts, bytes_of(&v))))
            .collect(),
    )
}

enum Node {
    Register,
    Rbcast {
        rb: Box<RbNode>,
        watch: Vec<(ProcessId, u64)>,
    },
    Snapshot(SnapNode),
    Transfer(TransferNode),
}

impl Node {
    async fn run(&mut self, ctx: &Ctx, call: &Call) -> Ret {
        match (self, call) {
            (Node::Register, Call::Write(v)) => {
                ctx.write(Label::named(REGISTER), Value::bytes(v)).await;
                Ret::Ack
            }
            (Node::Register, Call::Read(owner)) => {
                let v = ctx.read(*owner, &Label::named(REGISTER)).await;
                Ret::Value((!v.is_bottom()).then(|| bytes_of(&v)))
            }
            (Node::Rbcast { rb, .. }, Call::Broadcast { ts, val }) => {
                rb.broadcast(ctx, *ts, Value::bytes(val)).await;
                Ret::Ack
            }
            (Node::Rbcast { rb, .. }, Call::Deliver { from, ts }) => {
                Ret::Value(rb.deliver(ctx, *from, *ts).await.map(|v| bytes_of(&v)))
            }
            (Node::Snapshot(s), Call::Update(v)) => {
                s.update(ctx, Value::bytes(v)).await;
                Ret::Ack
            }
            (Node::Snapshot(s), Call::Snapshot) => array_ret(&s.snapshot(ctx).await),
            (Node::Transfer(t), Call::Transfer { dst, amount, .. }) => {
                Ret::Bool(t.transfer(ctx, *dst, *amount).await)
            }
            (Node::Transfer(t), Call::Read(target)) => Ret::Amount(t.read(ctx, *target).await),
            (_, call) => panic!("operation {call} does not belong to this object"),
        }
    }

    /// One round of background work: a pass over undelivered watched
    /// broadcasts, or one snapshot. Returns false when there is nothing to do.
    async fn help(&mut self, ctx: &Ctx) -> bool {
        match self {
            Node::Register => false,
            Node::Rbcast { rb, watch } => {
                let pending: Vec<(ProcessId, u64)> = watch
                    .iter()
                    .copied()
                    .filter(|&(j, ts)| rb.delivered(j, ts).is_none())
                    .collect();
                for &(j, ts) in &pending {
                    rb.deliver(ctx, j, ts).await;
                }
                !pending.is_empty()
            }
            Node::Snapshot(s) => {
                s.snapshot(ctx).await;
                true
            }
            Node::Transfer(t) => {
                t.snap_mut().snapshot(ctx).await;
                true
            }
        }
    }

    /// Background work once the workload is done.
    async fn idle(&mut self, ctx: &Ctx) {
        while self.help(ctx).await {}
    }
}

fn behavior(strategy: &Strategy) -> Behavior {
    match strategy.clone() {
        Strategy::CrashSilent => Behavior::Silent,
        Strategy::RegisterReset => Behavior::Run(Box::new(register_reset)),
        Strategy::Equivocate { stamps, values } => Behavior::Run(Box::new(move |ctx| {
            let values = values.iter().map(Value::bytes).collect();
            equivocate(ctx, Instance::named(RB_INSTANCE), stamps, values)
        })),
        Strategy::Twisted { values: [a, b] } => Behavior::Run(Box::new(move |ctx| {
            twisted(ctx, [Value::bytes(a), Value::bytes(b)])
        })),
        Strategy::Overspend { records } => Behavior::Run(Box::new(move |ctx| overspend(ctx, records))),
        Strategy::Scribble { values } => Behavior::Run(Box::new(move |ctx| scribble(ctx, values))),
    }
}

fn scribble(ctx: Ctx, values: Vec<Vec<u8>>) -> LocalTask {
    Box::pin(async move {
        if values.is_empty() {
            return;
        }
        for v in values.iter().cycle() {
            ctx.write(Label::named(REGISTER), Value::bytes(v)).await;
        }
    })
}

pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub kind: crate::checker::ObjectKind,
    pub n: usize,
    pub outcome: RunOutcome,
    pub obs: Observations,
    pub check: Option<CheckReport>,
    /// Per process: how far its workload got.
    pub progress: Vec<String>,
    pub results: Vec<ExpectResult>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<&ExpectResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }

    pub fn history_text(&self) -> String {
        histfile::render(&self.kind, self.n, &self.outcome.history)
    }

    pub fn verdict_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario={} seed={}\n", self.scenario, self.seed));
        out.push_str(&format!(
            "status={} steps={} fingerprint={:016x}\n",
            self.outcome.status.name(),
            self.outcome.steps,
            self.outcome.fingerprint
        ));
        for line in &self.progress {
            out.push_str(&format!("progress {line}\n"));
        }
        for r in &self.results {
            let mark = if r.passed { "pass" } else { "FAIL" };
            out.push_str(&format!("expect {} {mark}", r.name));
            if !r.detail.is_empty() {
                out.push_str(&format!(": {}", r.detail));
            }
            out.push('\n');
        }
        for v in &self.outcome.violations {
            out.push_str(&format!("violation {v}\n"));
        }
        if let Some(c) = &self.check {
            out.push_str(&c.to_string());
        }
        out
    }
}

/// Runs `scenario` once.
pub fn execute(scenario: &Scenario, mode: TraceMode) -> Result<RunReport, SimError> {
    let cfg = scenario.config.clone();
    let n = cfg.n;
    let f = cfg.f;
    let mut sim = Simulation::new(cfg.clone(), mode)?;
    let recorder = Rc::new(Recorder::default());
    match scenario.object {
        Object::Register => {}
        Object::Rbcast => sim.add_monitor(Box::new(RbMonitor::new())),
        Object::Snapshot | Object::Transfer => {
            sim.add_monitor(Box::new(RbMonitor::new()));
            sim.add_monitor(Box::new(SnapMonitor::new()));
        }
    }
    let mut watch: Vec<(ProcessId, u64)> = Vec::new();
    for op in &scenario.ops {
        if let Call::Broadcast { ts, .. } = op.call {
            watch.push((op.process, ts));
        }
    }
    for adv in &scenario.adversaries {
        if let Strategy::Equivocate { stamps, .. } = &adv.strategy {
            watch.extend(stamps.iter().map(|&ts| (adv.process, ts)));
        }
    }
    watch.sort();
    watch.dedup();

    let done: Rc<Vec<Cell<bool>>> = Rc::new(scenario.ops.iter().map(|_| Cell::new(false)).collect());
    let finished: Rc<Vec<Cell<bool>>> = Rc::new((0..n).map(|_| Cell::new(false)).collect());
    let current: Rc<Vec<Cell<usize>>> = Rc::new((0..n).map(|_| Cell::new(0)).collect());
    for p in ProcessId::all(n) {
        let ctx = sim.ctx(p);
        let mut node = match scenario.object {
            Object::Register => Node::Register,
            Object::Rbcast => Node::Rbcast {
                rb: Box::new(
                    RbNode::new(p, n, f, Instance::named(RB_INSTANCE)).with_observer(recorder.clone()),
                ),
                watch: watch.clone(),
            },
            Object::Snapshot => Node::Snapshot(SnapNode::new(p, n, f).with_observer(recorder.clone())),
            Object::Transfer => Node::Transfer(TransferNode::new(
                SnapNode::new(p, n, f).with_observer(recorder.clone()),
                scenario.initial.clone(),
            )),
        };
        let mine: Vec<(usize, super::OpSpec)> = scenario
            .ops
            .iter()
            .cloned()
            .enumerate()
            .filter(|(_, op)| op.process == p)
            .collect();
        let (done, finished, current) = (done.clone(), finished.clone(), current.clone());
        sim.spawn(
            p,
            Box::pin(async move {
                for (idx, op) in mine {
                    current[p.index()].set(idx + 1);
                    while ctx.step() < op.at || op.after.is_some_and(|a| !done[a - 1].get()) {
                        if !node.help(&ctx).await {
                            ctx.pause().await;
                        }
                    }
                    ctx.invoke(op.call.clone()).await;
                    let ret = node.run(&ctx, &op.call).await;
                    ctx.respond(ret).await;
                    done[idx].set(true);
                }
                finished[p.index()].set(true);
                node.idle(&ctx).await;
            }),
        );
    }
    for adv in &scenario.adversaries {
        sim.corrupt(Corruption::new(
            adv.process,
            Trigger::AtStep(adv.at),
            behavior(&adv.strategy),
        ))?;
    }

    let drain = scenario.drain;
    let mut drained_from: Option<u64> = None;
    let fin = finished.clone();
    let status = sim.run(|w| {
        if let Some(s) = drained_from {
            return w.step() >= s + drain;
        }
        let all = ProcessId::all(n).all(|p| w.is_corrupted(p) || fin[p.index()].get());
        if all {
            drained_from = Some(w.step());
            return drain == 0;
        }
        false
    });
    // A run whose workload finished counts as stopped even if the drain
    // hit the step budget.
    let status = if drained_from.is_some() {
        RunStatus::Stopped
    } else {
        status
    };

    let mut obs = std::mem::take(&mut *recorder.0.borrow_mut());
    let never: BTreeSet<ProcessId> = sim.world().corrupted().keys().copied().collect();
    if scenario.object == Object::Transfer {
        let w = sim.world();
        let verify = |sv: &SignedValue| w.verify(sv);
        obs.settlements = obs
            .snapshots
            .iter()
            .map(|s| settle(&s.array, &scenario.initial, &verify))
            .collect();
    }
    obs.done = done.iter().map(Cell::get).collect();
    let progress = ProcessId::all(n)
        .map(|p| {
            let total = scenario.ops.iter().filter(|o| o.process == p).count();
            let completed = scenario
                .ops
                .iter()
                .zip(&obs.done)
                .filter(|(o, d)| o.process == p && **d)
                .count();
            let state = if never.contains(&p) {
                "corrupted".to_string()
            } else if finished[p.index()].get() {
                "idle".to_string()
            } else {
                let k = current[p.index()].get();
                format!("in op {k} ({})", scenario.ops[k - 1].call)
            };
            format!("p{p} {completed}/{total} {state}")
        })
        .collect();
    let outcome = sim.finish(status);

    let check = if scenario.expect.contains(&Expectation::CheckerPass) {
        let mut input = CheckInput::new(scenario.kind(), outcome.history.clone()).budget(scenario.budget);
        input.byzantine = outcome.corrupted.keys().copied().collect();
        Some(check(&input).expect("simulator histories are well formed"))
    } else {
        None
    };
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        seed: cfg.seed,
        kind: scenario.kind(),
        n,
        outcome,
        obs,
        check,
        progress,
        results: Vec::new(),
    };
    report.results = evaluate(scenario, &report);
    Ok(report)
}
