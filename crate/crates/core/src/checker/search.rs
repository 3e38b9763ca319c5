//! Depth-first linearization search with memoized dead ends.

use std::collections::HashSet;

use crate::checker::spec::SequentialSpec;
use crate::checker::{Candidate, WitnessStep};
use crate::sim::Operation;

pub const MAX_SLOTS: usize = 128;

pub enum Outcome {
    Found(Vec<WitnessStep>),
    Exhausted,
    OutOfNodes,
}

pub struct Search<'a, S: SequentialSpec> {
    spec: &'a S,
    ops: &'a [Operation],
    candidates: &'a [Candidate],
    budget: usize,
    /// Per correct op: mask of completed ops that responded before it began.
    preds: Vec<u128>,
    required: u128,
    cand_mask: u128,
    dead: HashSet<(u128, S::State)>,
    nodes: u64,
    node_limit: u64,
}

impl<'a, S: SequentialSpec> Search<'a, S> {
    pub fn new(
        spec: &'a S,
        ops: &'a [Operation],
        candidates: &'a [Candidate],
        budget: usize,
        node_limit: u64,
    ) -> Self {
        assert!(ops.len() + candidates.len() <= MAX_SLOTS);
        let preds = ops
            .iter()
            .map(|o| {
                ops.iter()
                    .enumerate()
                    .filter(|(_, u)| u.precedes(o))
                    .fold(0u128, |m, (i, _)| m | 1 << i)
            })
            .collect();
        let required = ops
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.is_pending())
            .fold(0u128, |m, (i, _)| m | 1 << i);
        let cand_mask = (ops.len()..ops.len() + candidates.len()).fold(0u128, |m, i| m | 1 << i);
        Search {
            spec,
            ops,
            candidates,
            budget,
            preds,
            required,
            cand_mask,
            dead: HashSet::new(),
            nodes: 0,
            node_limit,
        }
    }

    pub fn run(mut self) -> Outcome {
        let mut path = Vec::new();
        match self.dfs(0, self.spec.initial(), &mut path) {
            Some(true) => Outcome::Found(path),
            Some(false) => Outcome::Exhausted,
            None => Outcome::OutOfNodes,
        }
    }

    /// `Some(true)` on success (witness in `path`), `Some(false)` when the
    /// subtree has no linearization, `None` when the node limit ran out.
    fn dfs(&mut self, mask: u128, state: S::State, path: &mut Vec<WitnessStep>) -> Option<bool> {
        if mask & self.required == self.required {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return None;
        }
        if self.dead.contains(&(mask, state.clone())) {
            return Some(false);
        }
        for (i, op) in self.ops.iter().enumerate() {
            if mask & 1 << i != 0 || self.preds[i] & !mask != 0 {
                continue;
            }
            let Some((next, ret)) = self.spec.apply(&state, op.process, &op.call, op.ret.as_ref()) else {
                continue;
            };
            path.push(WitnessStep {
                process: op.process,
                call: op.call.clone(),
                ret,
                byzantine: false,
            });
            if self.dfs(mask | 1 << i, next, path)? {
                return Some(true);
            }
            path.pop();
        }
        if ((mask & self.cand_mask).count_ones() as usize) < self.budget {
            for (k, c) in self.candidates.iter().enumerate() {
                let bit = 1u128 << (self.ops.len() + k);
                if mask & bit != 0 {
                    continue;
                }
                let Some((next, ret)) = self.spec.apply(&state, c.process, &c.call, None) else {
                    continue;
                };
                path.push(WitnessStep {
                    process: c.process,
                    call: c.call.clone(),
                    ret,
                    byzantine: true,
                });
                if self.dfs(mask | bit, next, path)? {
                    return Some(true);
                }
                path.pop();
            }
        }
        self.dead.insert((mask, state));
        Some(false)
    }
}

/// Replays a witness through the sequential specification and checks it is a valid
/// linearization of `ops`: every completed op appears once with its
/// recorded response, and real-time order is respected.
pub fn validate_witness<S: SequentialSpec>(spec: &S, ops: &[Operation], witness: &[WitnessStep]) -> bool {
    let mut state = spec.initial();
    let mut placed: Vec<Option<usize>> = vec![None; ops.len()];
    for (pos, step) in witness.iter().enumerate() {
        let observed = if step.byzantine {
            None
        } else {
            let Some(i) = (0..ops.len()).find(|&i| {
                placed[i].is_none()
                    && ops[i].process == step.process
                    && ops[i].call == step.call
                    && ops[i].ret.as_ref().is_none_or(|r| *r == step.ret)
            }) else {
                return false;
            };
            placed[i] = Some(pos);
            ops[i].ret.as_ref()
        };
        match spec.apply(&state, step.process, &step.call, observed) {
            Some((next, ret)) if ret == step.ret => state = next,
            _ => return false,
        }
    }
    for (i, a) in ops.iter().enumerate() {
        if !a.is_pending() && placed[i].is_none() {
            return false;
        }
        for (j, b) in ops.iter().enumerate() {
            if let (Some(pa), Some(pb)) = (placed[i], placed[j]) {
                if a.precedes(b) && pa > pb {
                    return false;
                }
            }
        }
    }
    true
}
