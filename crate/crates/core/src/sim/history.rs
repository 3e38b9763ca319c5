//! Object-level histories: invocation and response events of the operations
//! correct (and not-yet-corrupted) processes run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::sim::ProcessId;

/// An operation together with its arguments. The invoking process is
/// recorded on the event, not here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Call {
    /// Register write by the register's owner.
    Write(Vec<u8>),
    /// Register read of the given owner's register, or asset-transfer
    /// balance read of the given account.
    Read(ProcessId),
    Broadcast {
        ts: u64,
        val: Vec<u8>,
    },
    Deliver {
        from: ProcessId,
        ts: u64,
    },
    Update(Vec<u8>),
    Snapshot,
    Transfer {
        src: ProcessId,
        dst: ProcessId,
        amount: u64,
    },
}

/// An entry of a returned snapshot array: `(ts, val)` or `⊥`.
pub type ArrayEntry = Option<(u64, Vec<u8>)>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ret {
    Ack,
    Value(Option<Vec<u8>>),
    Array(Vec<ArrayEntry>),
    Bool(bool),
    Amount(u64),
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::Write(_) => "write",
            Call::Read(_) => "read",
            Call::Broadcast { .. } => "broadcast",
            Call::Deliver { .. } => "deliver",
            Call::Update(_) => "update",
            Call::Snapshot => "snapshot",
            Call::Transfer { .. } => "transfer",
        }
    }

    /// Canonical encoding of the arguments alone.
    pub fn args_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            Call::Write(v) | Call::Update(v) => v.encode(&mut enc),
            Call::Read(p) => p.encode(&mut enc),
            Call::Broadcast { ts, val } => (*ts, val.clone()).encode(&mut enc),
            Call::Deliver { from, ts } => (*from, *ts).encode(&mut enc),
            Call::Snapshot => {}
            Call::Transfer { src, dst, amount } => {
                src.encode(&mut enc);
                dst.encode(&mut enc);
                amount.encode(&mut enc);
            }
        }
        enc.finish()
    }

    pub fn from_parts(name: &str, args: &[u8]) -> Result<Call, DecodeError> {
        let mut dec = Decoder::new(args);
        let call = match name {
            "write" => Call::Write(Vec::decode(&mut dec)?),
            "read" => Call::Read(ProcessId::decode(&mut dec)?),
            "broadcast" => {
                let (ts, val) = <(u64, Vec<u8>)>::decode(&mut dec)?;
                Call::Broadcast { ts, val }
            }
            "deliver" => {
                let (from, ts) = <(ProcessId, u64)>::decode(&mut dec)?;
                Call::Deliver { from, ts }
            }
            "update" => Call::Update(Vec::decode(&mut dec)?),
            "snapshot" => Call::Snapshot,
            "transfer" => Call::Transfer {
                src: ProcessId::decode(&mut dec)?,
                dst: ProcessId::decode(&mut dec)?,
                amount: u64::decode(&mut dec)?,
            },
            _ => return Err(DecodeError::Invalid("unknown operation name")),
        };
        dec.finish()?;
        Ok(call)
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Call::Write(v) => write!(f, "write({})", show_bytes(v)),
            Call::Read(p) => write!(f, "read({p})"),
            Call::Broadcast { ts, val } => write!(f, "broadcast({ts},{})", show_bytes(val)),
            Call::Deliver { from, ts } => write!(f, "deliver({from},{ts})"),
            Call::Update(v) => write!(f, "update({})", show_bytes(v)),
            Call::Snapshot => write!(f, "snapshot()"),
            Call::Transfer { src, dst, amount } => write!(f, "transfer({src},{dst},{amount})"),
        }
    }
}

impl fmt::Display for Ret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ret::Ack => write!(f, "ok"),
            Ret::Value(None) => write!(f, "⊥"),
            Ret::Value(Some(v)) => write!(f, "{}", show_bytes(v)),
            Ret::Array(entries) => {
                write!(f, "[")?;
                for (i, e) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match e {
                        None => write!(f, "⊥")?,
                        Some((ts, v)) => write!(f, "{ts}:{}", show_bytes(v))?,
                    }
                }
                write!(f, "]")
            }
            Ret::Bool(b) => write!(f, "{b}"),
            Ret::Amount(a) => write!(f, "{a}"),
        }
    }
}

/// Renders bytes as text when printable, hex otherwise.
pub fn show_bytes(v: &[u8]) -> String {
    match std::str::from_utf8(v) {
        Ok(s) if s.chars().all(|c| c.is_ascii_graphic()) => format!("\"{s}\""),
        _ => format!("0x{}", hex::encode(v)),
    }
}

impl Encode for Ret {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Ret::Ack => enc.put_u8(0),
            Ret::Value(v) => {
                enc.put_u8(1);
                v.encode(enc);
            }
            Ret::Array(entries) => {
                enc.put_u8(2);
                enc.put_len(entries.len());
                for e in entries {
                    e.encode(enc);
                }
            }
            Ret::Bool(b) => {
                enc.put_u8(3);
                b.encode(enc);
            }
            Ret::Amount(a) => {
                enc.put_u8(4);
                enc.put_u64(*a);
            }
        }
    }
}

impl Decode for Ret {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8()? {
            0 => Ok(Ret::Ack),
            1 => Ok(Ret::Value(Option::decode(dec)?)),
            2 => {
                let len = dec.get_len()?;
                let entries = (0..len)
                    .map(|_| ArrayEntry::decode(dec))
                    .collect::<Result<_, _>>()?;
                Ok(Ret::Array(entries))
            }
            3 => Ok(Ret::Bool(bool::decode(dec)?)),
            4 => Ok(Ret::Amount(dec.get_u64()?)),
            t => Err(dec.bad_tag(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Invocation(Call),
    Response(Ret),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    pub process: ProcessId,
    pub step: u64,
}

/// Something the harness observed a Byzantine process do at object level,
/// e.g. a transfer record of a Byzantine source that a correct process
/// applied. Used to seed the checker's candidate operations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hint {
    pub process: ProcessId,
    pub call: Call,
    /// Distinguishes otherwise identical actions (e.g. a sequence number).
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
    /// Corrupted processes and the step their corruption took effect.
    pub corrupted: BTreeMap<ProcessId, u64>,
    pub hints: Vec<Hint>,
}

/// A matched invocation/response pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operation {
    pub process: ProcessId,
    pub call: Call,
    pub ret: Option<Ret>,
    pub invoked: u64,
    pub responded: Option<u64>,
}

impl Operation {
    pub fn is_pending(&self) -> bool {
        self.responded.is_none()
    }

    /// Real-time precedence: `self` responded before `other` was invoked.
    pub fn precedes(&self, other: &Operation) -> bool {
        self.responded.is_some_and(|r| r < other.invoked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("step {step} does not increase (previous {prev})")]
    NonMonotoneStep { step: u64, prev: u64 },
    #[error("process {process} invoked at step {step} while an operation was pending")]
    DoubleInvocation { process: ProcessId, step: u64 },
    #[error("process {process} responded at step {step} without a pending invocation")]
    OrphanResponse { process: ProcessId, step: u64 },
}

impl History {
    pub fn invoke(&mut self, process: ProcessId, call: Call, step: u64) {
        self.events.push(Event {
            kind: EventKind::Invocation(call),
            process,
            step,
        });
    }

    pub fn respond(&mut self, process: ProcessId, ret: Ret, step: u64) {
        self.events.push(Event {
            kind: EventKind::Response(ret),
            process,
            step,
        });
    }

    /// Checks per-process alternation and strictly increasing steps.
    pub fn validate(&self) -> Result<(), HistoryError> {
        self.operations().map(|_| ())
    }

    /// Pairs invocations with responses, in invocation order.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let mut ops: Vec<Operation> = Vec::new();
        let mut open: BTreeMap<ProcessId, usize> = BTreeMap::new();
        let mut prev: Option<u64> = None;
        for ev in &self.events {
            if let Some(p) = prev {
                if ev.step <= p {
                    return Err(HistoryError::NonMonotoneStep {
                        step: ev.step,
                        prev: p,
                    });
                }
            }
            prev = Some(ev.step);
            match &ev.kind {
                EventKind::Invocation(call) => {
                    if open.contains_key(&ev.process) {
                        return Err(HistoryError::DoubleInvocation {
                            process: ev.process,
                            step: ev.step,
                        });
                    }
                    open.insert(ev.process, ops.len());
                    ops.push(Operation {
                        process: ev.process,
                        call: call.clone(),
                        ret: None,
                        invoked: ev.step,
                        responded: None,
                    });
                }
                EventKind::Response(ret) => {
                    let idx = open.remove(&ev.process).ok_or(HistoryError::OrphanResponse {
                        process: ev.process,
                        step: ev.step,
                    })?;
                    ops[idx].ret = Some(ret.clone());
                    ops[idx].responded = Some(ev.step);
                }
            }
        }
        Ok(ops)
    }

    /// `H|correct`: drops every event of a process in `byzantine`.
    pub fn project_correct(&self, byzantine: &BTreeSet<ProcessId>) -> History {
        History {
            events: self
                .events
                .iter()
                .filter(|e| !byzantine.contains(&e.process))
                .cloned()
                .collect(),
            corrupted: self.corrupted.clone(),
            hints: self.hints.clone(),
        }
    }

    pub fn byzantine(&self) -> BTreeSet<ProcessId> {
        self.corrupted.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> ProcessId {
        ProcessId::new(i)
    }

    #[test]
    fn pairs_operations() {
        let mut h = History::default();
        h.invoke(p(1), Call::Write(b"a".to_vec()), 1);
        h.invoke(p(2), Call::Read(p(1)), 2);
        h.respond(p(1), Ret::Ack, 3);
        h.respond(p(2), Ret::Value(Some(b"a".to_vec())), 4);
        h.invoke(p(1), Call::Snapshot, 5);
        let ops = h.operations().unwrap();
        assert_eq!(ops.len(), 3);
        assert!(!ops[0].precedes(&ops[1]));
        assert!(ops[0].precedes(&ops[2]));
        assert!(ops[2].is_pending());
    }

    #[test]
    fn rejects_malformed() {
        let mut h = History::default();
        h.invoke(p(1), Call::Snapshot, 1);
        h.invoke(p(1), Call::Snapshot, 2);
        assert!(matches!(h.validate(), Err(HistoryError::DoubleInvocation { .. })));

        let mut h = History::default();
        h.respond(p(1), Ret::Ack, 1);
        assert!(matches!(h.validate(), Err(HistoryError::OrphanResponse { .. })));

        let mut h = History::default();
        h.invoke(p(1), Call::Snapshot, 3);
        h.respond(p(1), Ret::Ack, 3);
        assert!(matches!(h.validate(), Err(HistoryError::NonMonotoneStep { .. })));
    }

    #[test]
    fn call_args_round_trip() {
        let calls = [
            Call::Write(b"v".to_vec()),
            Call::Read(p(2)),
            Call::Broadcast {
                ts: 3,
                val: b"m".to_vec(),
            },
            Call::Deliver { from: p(4), ts: 1 },
            Call::Update(vec![0, 1]),
            Call::Snapshot,
            Call::Transfer {
                src: p(1),
                dst: p(2),
                amount: 5,
            },
        ];
        for call in calls {
            let back = Call::from_parts(call.name(), &call.args_bytes()).unwrap();
            assert_eq!(back, call);
        }
    }
}
