//! Brute-force reference for the linearizability checker. Shares nothing
//! with the library's search: its own object models, explicit enumeration of
//! candidate subsets and orders, no memoization.

use std::collections::BTreeMap;

use byztame::checker::{Candidate, ObjectKind};
use byztame::sim::{Call, Operation, ProcessId, Ret};
use itertools::Itertools;

#[derive(Clone, Debug)]
pub struct Model {
    regs: BTreeMap<ProcessId, Vec<u8>>,
    slots: BTreeMap<(ProcessId, u64), Vec<u8>>,
    comps: Vec<Option<Vec<u8>>>,
    money: Vec<u64>,
}

impl Model {
    pub fn new(kind: &ObjectKind) -> Model {
        Model {
            regs: BTreeMap::new(),
            slots: BTreeMap::new(),
            comps: match kind {
                ObjectKind::Snapshot { n } => vec![None; *n],
                _ => Vec::new(),
            },
            money: match kind {
                ObjectKind::Transfer { initial } => initial.clone(),
                _ => Vec::new(),
            },
        }
    }

    /// Runs `call` by `p`; `None` if the object does not allow it.
    pub fn run(&mut self, kind: &ObjectKind, p: ProcessId, call: &Call) -> Option<Ret> {
        match (kind, call) {
            (ObjectKind::Register, Call::Write(v)) => {
                self.regs.insert(p, v.clone());
                Some(Ret::Ack)
            }
            (ObjectKind::Register, Call::Read(j)) => Some(Ret::Value(self.regs.get(j).cloned())),
            (ObjectKind::Rbcast, Call::Broadcast { ts, val }) => {
                self.slots.entry((p, *ts)).or_insert_with(|| val.clone());
                Some(Ret::Ack)
            }
            (ObjectKind::Rbcast, Call::Deliver { from, ts }) => {
                Some(Ret::Value(self.slots.get(&(*from, *ts)).cloned()))
            }
            (ObjectKind::Snapshot { .. }, Call::Update(v)) => {
                if p.index() >= self.comps.len() {
                    return None;
                }
                self.comps[p.index()] = Some(v.clone());
                Some(Ret::Ack)
            }
            (ObjectKind::Snapshot { .. }, Call::Snapshot) => Some(Ret::Array(
                self.comps.iter().map(|c| c.clone().map(|v| (0, v))).collect(),
            )),
            (ObjectKind::Transfer { .. }, Call::Transfer { src, dst, amount }) => {
                if *src != p || dst.index() >= self.money.len() {
                    return None;
                }
                if *amount == 0 || self.money[src.index()] < *amount {
                    return Some(Ret::Bool(false));
                }
                self.money[src.index()] -= amount;
                self.money[dst.index()] += amount;
                Some(Ret::Bool(true))
            }
            (ObjectKind::Transfer { .. }, Call::Read(j)) => {
                self.money.get(j.index()).map(|b| Ret::Amount(*b))
            }
            _ => None,
        }
    }
}

/// Snapshot responses are compared on values only.
fn same(kind: &ObjectKind, model: &Ret, seen: &Ret) -> bool {
    match (kind, model, seen) {
        (ObjectKind::Snapshot { .. }, Ret::Array(a), Ret::Array(b)) => {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.as_ref().map(|e| &e.1) == y.as_ref().map(|e| &e.1))
        }
        _ => model == seen,
    }
}

struct Item<'a> {
    process: ProcessId,
    call: &'a Call,
    ret: Option<&'a Ret>,
    /// Index into the correct operations, for real-time order.
    op: Option<usize>,
}

fn replay(kind: &ObjectKind, order: &[&Item]) -> bool {
    let mut m = Model::new(kind);
    order.iter().all(|it| match m.run(kind, it.process, it.call) {
        Some(r) => it.ret.is_none_or(|seen| same(kind, &r, seen)),
        None => false,
    })
}

fn respects_real_time(ops: &[Operation], order: &[&Item]) -> bool {
    let placed: Vec<usize> = order.iter().filter_map(|it| it.op).collect();
    placed
        .iter()
        .enumerate()
        .all(|(i, &a)| placed[i + 1..].iter().all(|&b| !ops[b].precedes(&ops[a])))
}

/// Whether some subset of at most `budget` candidates and some subset of
/// the pending operations, together with all completed operations, can be
/// ordered respecting real time so the object accepts every response.
pub fn byzantine_linearizable(
    kind: &ObjectKind,
    ops: &[Operation],
    candidates: &[Candidate],
    budget: usize,
) -> bool {
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].is_pending()).collect();
    for k in 0..=budget.min(candidates.len()) {
        for chosen in (0..candidates.len()).combinations(k) {
            for extra in pending.iter().copied().powerset() {
                let mut items: Vec<Item> = ops
                    .iter()
                    .enumerate()
                    .filter(|(i, o)| !o.is_pending() || extra.contains(i))
                    .map(|(i, o)| Item {
                        process: o.process,
                        call: &o.call,
                        ret: o.ret.as_ref(),
                        op: Some(i),
                    })
                    .collect();
                items.extend(chosen.iter().map(|&c| Item {
                    process: candidates[c].process,
                    call: &candidates[c].call,
                    ret: None,
                    op: None,
                }));
                let mut order = Vec::new();
                if search(kind, ops, &items, &mut vec![false; items.len()], &mut order) {
                    return true;
                }
            }
        }
    }
    false
}

/// Plain backtracking over every order, pruning only on a rejected prefix.
fn search<'a>(
    kind: &ObjectKind,
    ops: &[Operation],
    items: &'a [Item<'a>],
    used: &mut Vec<bool>,
    order: &mut Vec<&'a Item<'a>>,
) -> bool {
    if order.len() == items.len() {
        return true;
    }
    for i in 0..items.len() {
        if used[i] {
            continue;
        }
        order.push(&items[i]);
        if respects_real_time(ops, order) && replay(kind, order) {
            used[i] = true;
            if search(kind, ops, items, used, order) {
                return true;
            }
            used[i] = false;
        }
        order.pop();
    }
    false
}

/// Textbook linearizability with no Byzantine processes: try every
/// permutation of the completed operations plus each subset of pending ones.
pub fn classical_linearizable(kind: &ObjectKind, ops: &[Operation]) -> bool {
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].is_pending()).collect();
    pending.iter().copied().powerset().any(|extra| {
        let items: Vec<Item> = ops
            .iter()
            .enumerate()
            .filter(|(i, o)| !o.is_pending() || extra.contains(i))
            .map(|(i, o)| Item {
                process: o.process,
                call: &o.call,
                ret: o.ret.as_ref(),
                op: Some(i),
            })
            .collect();
        let len = items.len();
        items
            .iter()
            .permutations(len)
            .any(|order| respects_real_time(ops, &order) && replay(kind, &order))
    })
}
