//! Reliable broadcast over SWMR registers, tolerating `f < n/2` Byzantine
//! processes.
//!
//! Each process owns four registers per instance: `send` (its latest signed
//! message), `echo`, `ready` and `deliver` (append-only sets stored whole).
//! A message travels send → echo → ready → deliver; promotion to ready and
//! to deliver both require a scan of every echo register that finds no
//! conflicting message with the same sender and timestamp.
//!
//! Wire shapes (all [`Value`]s):
//! * message `⟨"rb", instance, ts, val⟩_j`
//! * echo entry `⟨"echo", m⟩_i`
//! * ready attestation `⟨"ready", m⟩_i`
//! * certificate `[m, [attestation, ...]]`

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::codec::Encode;
use crate::sim::{
    Ctx, Instance, Label, LocalTask, Monitor, ProcessId, RbVar, SignedValue, Value, Violation, World,
    WriteEvent,
};

const MSG: &[u8] = b"rb";
const ECHO: &[u8] = b"echo";
const READY: &[u8] = b"ready";

/// A verified broadcast message.
#[derive(Debug, Clone)]
pub struct Message {
    pub sender: ProcessId,
    pub ts: u64,
    pub val: Value,
    pub signed: SignedValue,
}

impl Message {
    /// Same sender, timestamp and value (tags may differ).
    pub fn same(&self, other: &Message) -> bool {
        self.sender == other.sender && self.ts == other.ts && self.val == other.val
    }
}

/// The instance tag embedded in messages so they cannot be replayed across
/// instances.
pub fn instance_key(inst: &Instance) -> Value {
    Value::bytes(inst.to_bytes())
}

pub fn message_payload(inst: &Instance, ts: u64, val: Value) -> Value {
    Value::list([Value::bytes(MSG), instance_key(inst), Value::Int(ts), val])
}

fn tagged(kind: &[u8], m: &SignedValue) -> Value {
    Value::list([Value::bytes(kind), Value::Signed(m.clone())])
}

pub fn echo_payload(m: &SignedValue) -> Value {
    tagged(ECHO, m)
}

pub fn ready_payload(m: &SignedValue) -> Value {
    tagged(READY, m)
}

pub fn certificate(m: &SignedValue, sigs: &[SignedValue]) -> Value {
    Value::list([
        Value::Signed(m.clone()),
        Value::list(sigs.iter().cloned().map(Value::Signed)),
    ])
}

/// Parses and verifies a message of instance `key`. `sender`, if given, must
/// match the signer.
pub fn parse_message(
    v: &Value,
    key: &Value,
    sender: Option<ProcessId>,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> Option<Message> {
    let sv = v.as_signed()?;
    if sender.is_some_and(|s| s != sv.signer()) {
        return None;
    }
    let [kind, inst, ts, val] = sv.payload().as_list()? else {
        return None;
    };
    if kind.as_bytes()? != MSG || inst != key {
        return None;
    }
    let ts = ts.as_int()?;
    if !verify(sv) {
        return None;
    }
    Some(Message {
        sender: sv.signer(),
        ts,
        val: val.clone(),
        signed: sv.clone(),
    })
}

/// The inner message of an echo entry or ready attestation of kind `kind`,
/// checked against `key`. The outer signature is verified iff `outer` is
/// given, and must then be by that process.
fn parse_wrapped(
    v: &Value,
    kind: &[u8],
    key: &Value,
    outer: Option<ProcessId>,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> Option<Message> {
    let sv = v.as_signed()?;
    let [k, inner] = sv.payload().as_list()? else {
        return None;
    };
    if k.as_bytes()? != kind {
        return None;
    }
    let m = parse_message(inner, key, None, verify)?;
    if let Some(owner) = outer {
        if sv.signer() != owner || !verify(sv) {
            return None;
        }
    }
    Some(m)
}

pub fn parse_echo(v: &Value, key: &Value, verify: &dyn Fn(&SignedValue) -> bool) -> Option<Message> {
    parse_wrapped(v, ECHO, key, None, verify)
}

/// Parses a ready attestation that must be signed by `owner`.
pub fn parse_ready(
    v: &Value,
    key: &Value,
    owner: ProcessId,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> Option<Message> {
    parse_wrapped(v, READY, key, Some(owner), verify)
}

/// Validates a delivery certificate: a verifying message plus at least
/// `quorum` verifying ready attestations on it from distinct signers.
pub fn parse_certificate(
    v: &Value,
    key: &Value,
    quorum: usize,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> Option<Message> {
    let [m, sigs] = v.as_list()? else {
        return None;
    };
    let m = parse_message(m, key, None, verify)?;
    let mut signers = BTreeSet::new();
    for sig in sigs.as_list()? {
        let Some(sv) = sig.as_signed() else { continue };
        if signers.contains(&sv.signer()) {
            continue;
        }
        if let Some(att) = parse_ready(sig, key, sv.signer(), verify) {
            if att.same(&m) {
                signers.insert(sv.signer());
            }
        }
    }
    (signers.len() >= quorum).then_some(m)
}

/// True iff some entry of the given echo registers holds a verifying
/// message from `m`'s sender with `m`'s timestamp and a different value.
pub fn conflicts(echoes: &[Value], m: &Message, key: &Value, verify: &dyn Fn(&SignedValue) -> bool) -> bool {
    echoes.iter().any(|reg| {
        reg.as_list().is_some_and(|entries| {
            entries.iter().any(|e| {
                parse_echo(e, key, verify)
                    .is_some_and(|o| o.sender == m.sender && o.ts == m.ts && o.val != m.val)
            })
        })
    })
}

/// Observer hooks for the harness.
pub trait RbObserver {
    fn delivered(&self, _by: ProcessId, _inst: &Instance, _from: ProcessId, _ts: u64, _val: &Value) {}
}

/// One process's view of one broadcast instance.
pub struct RbNode {
    me: ProcessId,
    n: usize,
    f: usize,
    inst: Instance,
    key: Value,
    labels: [Label; 4],
    own_send: Value,
    echo: Vec<Value>,
    ready: Vec<Value>,
    deliver: Vec<Value>,
    echoed: Vec<Message>,
    readied: Vec<Message>,
    delivered: Vec<Message>,
    observer: Option<Rc<dyn RbObserver>>,
}

impl RbNode {
    pub fn new(me: ProcessId, n: usize, f: usize, inst: Instance) -> Self {
        let labels = RbVar::ALL.map(|var| Label::rb(&inst, var));
        RbNode {
            me,
            n,
            f,
            key: instance_key(&inst),
            inst,
            labels,
            own_send: Value::Bottom,
            echo: Vec::new(),
            ready: Vec::new(),
            deliver: Vec::new(),
            echoed: Vec::new(),
            readied: Vec::new(),
            delivered: Vec::new(),
            observer: None,
        }
    }

    pub fn with_observer(mut self, observer: Rc<dyn RbObserver>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    fn label(&self, var: RbVar) -> &Label {
        &self.labels[var as usize]
    }

    /// The value this process has delivered for `(from, ts)`, if any.
    pub fn delivered(&self, from: ProcessId, ts: u64) -> Option<&Value> {
        self.delivered
            .iter()
            .find(|m| m.sender == from && m.ts == ts)
            .map(|m| &m.val)
    }

    /// The certificate backing this process's delivery of `(from, ts)`.
    pub fn certificate_for(&self, from: ProcessId, ts: u64) -> Option<&Value> {
        let idx = self
            .delivered
            .iter()
            .position(|m| m.sender == from && m.ts == ts)?;
        Some(&self.deliver[idx])
    }

    /// Every message this process has delivered, in delivery order.
    pub fn deliveries(&self) -> &[Message] {
        &self.delivered
    }

    /// Broadcasts `val` with timestamp `ts` and returns once it is
    /// deliverable.
    pub async fn broadcast(&mut self, ctx: &Ctx, ts: u64, val: Value) {
        self.publish(ctx, ts, val).await;
        while self.deliver(ctx, self.me, ts).await.is_none() {}
    }

    /// Signs and writes `⟨ts, val⟩` into this process's `send` register
    /// without waiting for delivery.
    pub async fn publish(&mut self, ctx: &Ctx, ts: u64, val: Value) {
        let m = ctx.sign(message_payload(&self.inst, ts, val));
        self.own_send = Value::Signed(m);
        ctx.write(self.label(RbVar::Send).clone(), self.own_send.clone())
            .await;
    }

    /// Returns the value delivered for `(from, ts)`, or `None` if it is not
    /// deliverable yet.
    pub async fn deliver(&mut self, ctx: &Ctx, from: ProcessId, ts: u64) -> Option<Value> {
        self.refresh(ctx).await;
        if let Some(v) = self.delivered(from, ts) {
            return Some(v.clone());
        }
        let quorum = self.f + 1;
        for k in ProcessId::all(self.n) {
            if k == self.me {
                continue;
            }
            let reg = ctx.read(k, self.label(RbVar::Deliver)).await;
            let Some(certs) = reg.as_list() else { continue };
            let verify = |sv: &SignedValue| ctx.verify(sv);
            for cert in certs {
                let Some(m) = parse_certificate(cert, &self.key, quorum, &verify) else {
                    continue;
                };
                if m.sender == from && m.ts == ts {
                    self.deliver.push(cert.clone());
                    ctx.write(
                        self.label(RbVar::Deliver).clone(),
                        Value::list(self.deliver.iter().cloned()),
                    )
                    .await;
                    let val = m.val.clone();
                    self.record_delivery(m);
                    return Some(val);
                }
            }
        }
        None
    }

    fn record_delivery(&mut self, m: Message) {
        if let Some(obs) = &self.observer {
            obs.delivered(self.me, &self.inst, m.sender, m.ts, &m.val);
        }
        self.delivered.push(m);
    }

    /// One pass over every process's `send` register, promoting what can be
    /// promoted.
    pub async fn refresh(&mut self, ctx: &Ctx) {
        for j in ProcessId::all(self.n) {
            let raw = if j == self.me {
                self.own_send.clone()
            } else {
                ctx.read(j, self.label(RbVar::Send)).await
            };
            let verify = |sv: &SignedValue| ctx.verify(sv);
            let Some(m) = parse_message(&raw, &self.key, Some(j), &verify) else {
                continue;
            };
            if self.delivered.iter().any(|d| d.same(&m)) {
                continue;
            }
            if !self.echoed.iter().any(|e| e.same(&m)) {
                self.echo.push(Value::Signed(ctx.sign(echo_payload(&m.signed))));
                ctx.write(
                    self.label(RbVar::Echo).clone(),
                    Value::list(self.echo.iter().cloned()),
                )
                .await;
                self.echoed.push(m.clone());
            }
            if !self.readied.iter().any(|r| r.same(&m)) {
                if self.conflicting_echo(ctx, &m).await {
                    continue;
                }
                self.ready.push(Value::Signed(ctx.sign(ready_payload(&m.signed))));
                ctx.write(
                    self.label(RbVar::Ready).clone(),
                    Value::list(self.ready.iter().cloned()),
                )
                .await;
                self.readied.push(m.clone());
            }
            if self.delivered(m.sender, m.ts).is_some() {
                continue;
            }
            let sigs = self.gather_readies(ctx, &m).await;
            if sigs.len() > self.f && !self.conflicting_echo(ctx, &m).await {
                self.deliver.push(certificate(&m.signed, &sigs[..=self.f]));
                ctx.write(
                    self.label(RbVar::Deliver).clone(),
                    Value::list(self.deliver.iter().cloned()),
                )
                .await;
                self.record_delivery(m);
            }
        }
    }

    /// Reads every ready register and returns the attestations on `m`, one
    /// per distinct owner, in ascending owner order.
    async fn gather_readies(&self, ctx: &Ctx, m: &Message) -> Vec<SignedValue> {
        let mut out = Vec::new();
        for k in ProcessId::all(self.n) {
            let reg = if k == self.me {
                Value::list(self.ready.iter().cloned())
            } else {
                ctx.read(k, self.label(RbVar::Ready)).await
            };
            let Some(entries) = reg.as_list() else { continue };
            let verify = |sv: &SignedValue| ctx.verify(sv);
            if let Some(att) = entries
                .iter()
                .find(|e| parse_ready(e, &self.key, k, &verify).is_some_and(|a| a.same(m)))
            {
                out.push(att.as_signed().expect("parsed").clone());
            }
        }
        out
    }

    /// Scans all echo registers in ascending owner order.
    async fn conflicting_echo(&self, ctx: &Ctx, m: &Message) -> bool {
        let verify = |sv: &SignedValue| ctx.verify(sv);
        for k in ProcessId::all(self.n) {
            let reg = if k == self.me {
                Value::list(self.echo.iter().cloned())
            } else {
                ctx.read(k, self.label(RbVar::Echo)).await
            };
            if conflicts(std::slice::from_ref(&reg), m, &self.key, &verify) {
                return true;
            }
        }
        false
    }
}

/// Equivocating sender for instance `inst`. It signs each of `values` under
/// every timestamp in `stamps` and cycles its `send` register through them,
/// each time rewriting its `echo` register to echo only the message on
/// display. Its `ready` register attests all of them, and it assembles
/// certificates out of whatever attestations it can collect.
pub fn equivocate(ctx: Ctx, inst: Instance, stamps: Vec<u64>, values: Vec<Value>) -> LocalTask {
    Box::pin(async move {
        let n = ctx.n();
        let quorum = ctx.f() + 1;
        let key = instance_key(&inst);
        let label = |var| Label::rb(&inst, var);
        let mut msgs = Vec::new();
        for &ts in &stamps {
            for v in &values {
                msgs.push(ctx.sign(message_payload(&inst, ts, v.clone())));
            }
        }
        let ready = Value::list(msgs.iter().map(|m| Value::Signed(ctx.sign(ready_payload(m)))));
        ctx.write(label(RbVar::Ready), ready).await;
        loop {
            for m in &msgs {
                ctx.write(label(RbVar::Send), Value::Signed(m.clone())).await;
                let echo = Value::list([Value::Signed(ctx.sign(echo_payload(m)))]);
                ctx.write(label(RbVar::Echo), echo).await;
            }
            let mut atts: BTreeMap<usize, BTreeMap<ProcessId, SignedValue>> = BTreeMap::new();
            for k in ProcessId::all(n) {
                let reg = ctx.read(k, &label(RbVar::Ready)).await;
                let Some(entries) = reg.as_list() else { continue };
                let verify = |sv: &SignedValue| ctx.verify(sv);
                for e in entries {
                    let Some(a) = parse_ready(e, &key, k, &verify) else {
                        continue;
                    };
                    if let Some(idx) = msgs
                        .iter()
                        .position(|m| m.signer() == a.sender && m.payload() == a.signed.payload())
                    {
                        atts.entry(idx)
                            .or_default()
                            .insert(k, e.as_signed().expect("parsed").clone());
                    }
                }
            }
            let certs: Vec<Value> = atts
                .iter()
                .filter(|(_, by)| by.len() >= quorum)
                .map(|(&idx, by)| {
                    let sigs: Vec<SignedValue> = by.values().cloned().collect();
                    certificate(&msgs[idx], &sigs)
                })
                .collect();
            if !certs.is_empty() {
                ctx.write(label(RbVar::Deliver), Value::list(certs)).await;
            }
        }
    })
}

/// (instance, sender, ts) → value → correct writers that attested it.
type Attestations = BTreeMap<(Instance, ProcessId, u64), Vec<(Value, BTreeSet<ProcessId>)>>;

#[derive(Default)]
struct Seen {
    ready: Attestations,
    /// Same, for delivery certificates.
    deliver: Attestations,
    /// Every valid certificate ever written, by anyone.
    certified: Vec<(Instance, Message)>,
}

fn note(map: &mut Attestations, inst: &Instance, m: &Message, writer: ProcessId) {
    let slot = map.entry((inst.clone(), m.sender, m.ts)).or_default();
    match slot.iter_mut().find(|(v, _)| *v == m.val) {
        Some((_, ws)) => {
            ws.insert(writer);
        }
        None => slot.push((m.val.clone(), BTreeSet::from([writer]))),
    }
}

/// Online checks of the broadcast invariants: append-only registers and
/// ready-implies-echo at every correct write; ready/deliver agreement and
/// certificate backing over the never-corrupted processes at the end.
#[derive(Default)]
pub struct RbMonitor {
    seen: Rc<RefCell<Seen>>,
}

impl RbMonitor {
    pub fn new() -> Self {
        Self::default()
    }
}

fn appended<'a>(old: &'a Value, new: &'a Value) -> Option<&'a [Value]> {
    let new = new.as_list()?;
    let old: &[Value] = match old {
        Value::Bottom => &[],
        v => v.as_list()?,
    };
    (new.len() >= old.len() && new[..old.len()] == *old).then(|| &new[old.len()..])
}

impl Monitor for RbMonitor {
    fn on_write(&mut self, ev: &WriteEvent<'_>, world: &World, out: &mut Vec<Violation>) {
        let Label::Rb { instance, var } = ev.label else {
            return;
        };
        let key = instance_key(instance);
        let verify = |sv: &SignedValue| world.verify(sv);
        let quorum = world.config().f + 1;
        let mut seen = self.seen.borrow_mut();
        if *var == RbVar::Deliver {
            // Track certificates from everyone, Byzantine included.
            for c in ev.new.as_list().unwrap_or(&[]) {
                if let Some(m) = parse_certificate(c, &key, quorum, &verify) {
                    if !seen.certified.iter().any(|(i, x)| i == instance && x.same(&m)) {
                        seen.certified.push((instance.clone(), m));
                    }
                }
            }
        }
        if ev.byzantine || *var == RbVar::Send {
            return;
        }
        let Some(fresh) = appended(ev.old, ev.new) else {
            out.push(Violation {
                step: ev.step,
                check: "rbcast-append-only",
                detail: format!("{} shrank or was rewritten", ev.label.render(ev.writer)),
            });
            return;
        };
        match var {
            RbVar::Ready => {
                let echo = world.fabric().read(ev.writer, &Label::rb(instance, RbVar::Echo));
                for e in fresh {
                    let Some(m) = parse_ready(e, &key, ev.writer, &verify) else {
                        out.push(Violation {
                            step: ev.step,
                            check: "rbcast-ready-wellformed",
                            detail: format!("process {} wrote an invalid attestation", ev.writer),
                        });
                        continue;
                    };
                    let echoed = echo.as_list().is_some_and(|es| {
                        es.iter()
                            .any(|x| parse_echo(x, &key, &verify).is_some_and(|o| o.same(&m)))
                    });
                    if !echoed {
                        out.push(Violation {
                            step: ev.step,
                            check: "ready-needs-echo",
                            detail: format!(
                                "process {} readied ({}, {}) without echoing it",
                                ev.writer, m.sender, m.ts
                            ),
                        });
                    }
                    note(&mut seen.ready, instance, &m, ev.writer);
                }
            }
            RbVar::Deliver => {
                for c in fresh {
                    match parse_certificate(c, &key, quorum, &verify) {
                        Some(m) => note(&mut seen.deliver, instance, &m, ev.writer),
                        None => out.push(Violation {
                            step: ev.step,
                            check: "rbcast-deliver-wellformed",
                            detail: format!("process {} stored an invalid certificate", ev.writer),
                        }),
                    }
                }
            }
            RbVar::Echo | RbVar::Send => {}
        }
    }

    fn on_finish(&mut self, world: &World, out: &mut Vec<Violation>) {
        let seen = self.seen.borrow();
        let correct = |p: &ProcessId| !world.is_corrupted(*p);
        let step = world.step();
        for (check, map) in [
            ("ready-agreement", &seen.ready),
            ("deliver-agreement", &seen.deliver),
        ] {
            for ((inst, sender, ts), vals) in map {
                let held: Vec<&Value> = vals
                    .iter()
                    .filter(|(_, ws)| ws.iter().any(correct))
                    .map(|(v, _)| v)
                    .collect();
                if held.len() > 1 {
                    out.push(Violation {
                        step,
                        check,
                        detail: format!(
                            "correct processes hold {} different values for ({sender}, {ts}) in {inst}",
                            held.len()
                        ),
                    });
                }
            }
        }
        let n = world.config().n;
        for (inst, m) in &seen.certified {
            let key = instance_key(inst);
            let backed = ProcessId::all(n).filter(correct).any(|k| {
                let reg = world.fabric().read(k, &Label::rb(inst, RbVar::Ready));
                reg.as_list().is_some_and(|es| {
                    es.iter()
                        .any(|e| parse_ready(e, &key, k, &|sv| world.verify(sv)).is_some_and(|a| a.same(m)))
                })
            });
            if !backed {
                out.push(Violation {
                    step,
                    check: "certificate-backed",
                    detail: format!(
                        "certificate for ({}, {}) in {inst} has no correct ready attestation",
                        m.sender, m.ts
                    ),
                });
            }
        }
    }
}
