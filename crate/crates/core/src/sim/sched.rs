//! Seeded weighted random walk with a hard fairness window.
//!
//! Every process in the fair set must run at least once in any window of
//! `window` consecutive steps. Each fair process carries a deadline
//! (`last scheduled step + window`). Before drawing at random the scheduler
//! checks whether the `j` earliest deadlines could still be met if it spent
//! the current step elsewhere; if not, it runs the earliest-deadline process.
//! Weights are redrawn at the start of every window so the walk drifts
//! between very skewed and roughly even interleavings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::ProcessId;

#[derive(Debug, Clone)]
pub struct Scheduler {
    rng: ChaCha8Rng,
    window: u64,
    weights: Vec<u64>,
    next_redraw: u64,
    last: Vec<u64>,
    runnable: Vec<bool>,
    fair: Vec<bool>,
}

impl Scheduler {
    pub fn new(n: usize, seed: u64, window: u64) -> Self {
        Scheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            window,
            weights: vec![1; n],
            next_redraw: 1,
            last: vec![0; n],
            runnable: vec![true; n],
            fair: vec![true; n],
        }
    }

    /// Removes `p` from scheduling (finished or crashed).
    pub fn halt(&mut self, p: ProcessId) {
        self.runnable[p.index()] = false;
        self.fair[p.index()] = false;
    }

    /// Keeps `p` schedulable but drops its fairness guarantee (corrupted).
    pub fn unfair(&mut self, p: ProcessId) {
        self.fair[p.index()] = false;
    }

    /// Makes `p` schedulable again from `step` on.
    pub fn revive(&mut self, p: ProcessId, step: u64, fair: bool) {
        self.runnable[p.index()] = true;
        self.fair[p.index()] = fair;
        self.last[p.index()] = step;
    }

    pub fn is_runnable(&self, p: ProcessId) -> bool {
        self.runnable[p.index()]
    }

    /// Picks the process that runs at `step` (steps start at 1).
    pub fn pick(&mut self, step: u64) -> Option<ProcessId> {
        if step >= self.next_redraw {
            for w in &mut self.weights {
                *w = 1 << self.rng.gen_range(0..6);
            }
            self.next_redraw = step + self.window;
        }
        let chosen = self.forced(step).or_else(|| self.draw())?;
        self.last[chosen] = step;
        Some(ProcessId::from_index(chosen))
    }

    fn forced(&self, step: u64) -> Option<usize> {
        let mut deadlines: Vec<(u64, usize)> = (0..self.fair.len())
            .filter(|&i| self.fair[i])
            .map(|i| (self.last[i] + self.window, i))
            .collect();
        deadlines.sort_unstable();
        let tight = deadlines
            .iter()
            .enumerate()
            .any(|(j, &(d, _))| d < step + j as u64 + 1);
        if tight {
            deadlines.first().map(|&(_, i)| i)
        } else {
            None
        }
    }

    fn draw(&mut self) -> Option<usize> {
        let total: u64 = (0..self.weights.len())
            .filter(|&i| self.runnable[i])
            .map(|i| self.weights[i])
            .sum();
        if total == 0 {
            return None;
        }
        let mut ticket = self.rng.gen_range(0..total);
        for i in 0..self.weights.len() {
            if !self.runnable[i] {
                continue;
            }
            if ticket < self.weights[i] {
                return Some(i);
            }
            ticket -= self.weights[i];
        }
        unreachable!("ticket below total weight")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schedule(n: usize, seed: u64, window: u64, steps: u64) -> Vec<ProcessId> {
        let mut s = Scheduler::new(n, seed, window);
        (1..=steps).map(|t| s.pick(t).unwrap()).collect()
    }

    #[test]
    fn same_seed_same_schedule() {
        assert_eq!(schedule(5, 9, 20, 500), schedule(5, 9, 20, 500));
        assert_ne!(schedule(5, 9, 20, 500), schedule(5, 10, 20, 500));
    }

    #[test]
    fn halted_processes_never_run() {
        let mut s = Scheduler::new(3, 1, 3);
        s.halt(ProcessId::new(2));
        for t in 1..300 {
            assert_ne!(s.pick(t), Some(ProcessId::new(2)));
        }
        s.halt(ProcessId::new(1));
        s.halt(ProcessId::new(3));
        assert_eq!(s.pick(300), None);
    }

    proptest! {
        #[test]
        fn every_fair_process_runs_once_per_window(
            n in 1usize..7,
            extra in 0u64..10,
            seed in any::<u64>(),
            unfair in 0usize..3,
        ) {
            let window = n as u64 + extra;
            let mut s = Scheduler::new(n, seed, window);
            let unfair = unfair.min(n - 1);
            for i in 0..unfair {
                s.unfair(ProcessId::from_index(i));
            }
            let picks: Vec<usize> = (1..=600).map(|t| s.pick(t).unwrap().index()).collect();
            for start in 0..picks.len().saturating_sub(window as usize) {
                let slice = &picks[start..start + window as usize];
                for p in unfair..n {
                    prop_assert!(slice.contains(&p), "process {} missing in window at {}", p + 1, start + 1);
                }
            }
            // The very first window counts too.
            for p in unfair..n {
                prop_assert!(picks[..window as usize].contains(&p));
            }
        }
    }
}
