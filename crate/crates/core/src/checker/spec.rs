//! Sequential specifications of the four objects.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use crate::sim::{Call, ProcessId, Ret};

/// A deterministic sequential object. `apply` runs `call` by `process` in
/// `state`; it yields the next state and the object's response, or `None`
/// when the call is not allowed or `observed` differs from what the object
/// would return.
pub trait SequentialSpec {
    type State: Clone + Eq + Hash;

    fn initial(&self) -> Self::State;

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        call: &Call,
        observed: Option<&Ret>,
    ) -> Option<(Self::State, Ret)>;
}

fn accept<S>(next: S, ret: Ret, observed: Option<&Ret>) -> Option<(S, Ret)> {
    match observed {
        Some(o) if *o != ret => None,
        _ => Some((next, ret)),
    }
}

/// One SWMR register per process; `read(j)` reads process `j`'s register.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegisterSpec;

impl SequentialSpec for RegisterSpec {
    type State = BTreeMap<ProcessId, Vec<u8>>;

    fn initial(&self) -> Self::State {
        BTreeMap::new()
    }

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        call: &Call,
        observed: Option<&Ret>,
    ) -> Option<(Self::State, Ret)> {
        match call {
            Call::Write(v) => {
                let mut next = state.clone();
                next.insert(process, v.clone());
                accept(next, Ret::Ack, observed)
            }
            Call::Read(owner) => accept(state.clone(), Ret::Value(state.get(owner).cloned()), observed),
            _ => None,
        }
    }
}

/// `deliver(j, ts)` returns the value of `j`'s first `broadcast(ts, ·)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RbcastSpec;

impl SequentialSpec for RbcastSpec {
    type State = BTreeMap<(ProcessId, u64), Vec<u8>>;

    fn initial(&self) -> Self::State {
        BTreeMap::new()
    }

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        call: &Call,
        observed: Option<&Ret>,
    ) -> Option<(Self::State, Ret)> {
        match call {
            Call::Broadcast { ts, val } => {
                let mut next = state.clone();
                next.entry((process, *ts)).or_insert_with(|| val.clone());
                accept(next, Ret::Ack, observed)
            }
            Call::Deliver { from, ts } => accept(
                state.clone(),
                Ret::Value(state.get(&(*from, *ts)).cloned()),
                observed,
            ),
            _ => None,
        }
    }
}

/// Snapshot of `n` components. Only values are compared; timestamps in
/// responses are ignored.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotSpec {
    pub n: usize,
}

impl SequentialSpec for SnapshotSpec {
    type State = Vec<Option<Vec<u8>>>;

    fn initial(&self) -> Self::State {
        vec![None; self.n]
    }

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        call: &Call,
        observed: Option<&Ret>,
    ) -> Option<(Self::State, Ret)> {
        match call {
            Call::Update(v) => {
                let mut next = state.clone();
                *next.get_mut(process.index())? = Some(v.clone());
                accept(next, Ret::Ack, observed)
            }
            Call::Snapshot => {
                let ret = match observed {
                    Some(Ret::Array(entries)) => {
                        let values = entries.iter().map(|e| e.as_ref().map(|(_, v)| v));
                        if entries.len() != self.n || !values.eq(state.iter().map(Option::as_ref)) {
                            return None;
                        }
                        Ret::Array(entries.clone())
                    }
                    Some(_) => return None,
                    None => Ret::Array(state.iter().map(|v| v.clone().map(|v| (0, v))).collect()),
                };
                Some((state.clone(), ret))
            }
            _ => None,
        }
    }
}

/// One account per process with fixed initial balances.
#[derive(Debug, Clone)]
pub struct TransferSpec {
    pub initial: Vec<u64>,
}

impl SequentialSpec for TransferSpec {
    type State = Vec<u64>;

    fn initial(&self) -> Self::State {
        self.initial.clone()
    }

    fn apply(
        &self,
        state: &Self::State,
        process: ProcessId,
        call: &Call,
        observed: Option<&Ret>,
    ) -> Option<(Self::State, Ret)> {
        match call {
            Call::Transfer { src, dst, amount } => {
                if *src != process || dst.index() >= state.len() {
                    return None;
                }
                let ok = *amount > 0 && state[src.index()] >= *amount;
                let mut next = state.clone();
                if ok {
                    next[src.index()] -= amount;
                    next[dst.index()] += amount;
                }
                accept(next, Ret::Bool(ok), observed)
            }
            Call::Read(target) => {
                let bal = *state.get(target.index())?;
                accept(state.clone(), Ret::Amount(bal), observed)
            }
            _ => None,
        }
    }
}

/// The object a history was recorded against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectKind {
    Register,
    Rbcast,
    Snapshot { n: usize },
    Transfer { initial: Vec<u64> },
}

impl ObjectKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectKind::Register => "register",
            ObjectKind::Rbcast => "rbcast",
            ObjectKind::Snapshot { .. } => "snapshot",
            ObjectKind::Transfer { .. } => "asset-transfer",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
