use std::fmt;
use std::str::FromStr;

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::sim::SimError;

/// Identity of a process, `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(u32);

impl ProcessId {
    /// Creates an identity without checking it against a system size.
    ///
    /// Panics on zero, which is never a valid identity.
    pub const fn new(id: u32) -> Self {
        assert!(id >= 1, "process ids start at 1");
        ProcessId(id)
    }

    pub fn checked(id: u32, n: usize) -> Result<Self, SimError> {
        if id >= 1 && (id as usize) <= n {
            Ok(ProcessId(id))
        } else {
            Err(SimError::BadProcess { id, n })
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based index, for per-process arrays.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        ProcessId(index as u32 + 1)
    }

    /// All identities of an `n`-process system in ascending order.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (1..=n as u32).map(ProcessId)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ProcessId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id: u32 = s.trim().parse().map_err(|_| format!("bad process id `{s}`"))?;
        if id == 0 {
            return Err("process ids start at 1".into());
        }
        Ok(ProcessId(id))
    }
}

impl Encode for ProcessId {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(u64::from(self.0));
    }
}

impl Decode for ProcessId {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let raw = dec.get_u64()?;
        if raw == 0 || raw > u64::from(u32::MAX) {
            return Err(DecodeError::Invalid("process id out of range"));
        }
        Ok(ProcessId(raw as u32))
    }
}

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    pub n: usize,
    pub f: usize,
    pub seed: u64,
    pub max_steps: u64,
    /// Every live, uncorrupted process is scheduled at least once in any
    /// window of this many consecutive steps.
    pub fairness_window: u64,
}

impl SystemConfig {
    pub fn new(n: usize, f: usize, seed: u64) -> Self {
        SystemConfig {
            n,
            f,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
            fairness_window: 4 * n as u64,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_fairness_window(mut self, window: u64) -> Self {
        self.fairness_window = window;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::Config("n must be at least 1".into()));
        }
        if self.f > self.n {
            return Err(SimError::Config(format!(
                "fault budget f={} exceeds n={}",
                self.f, self.n
            )));
        }
        if self.fairness_window < self.n as u64 {
            return Err(SimError::Config(format!(
                "fairness window {} is smaller than n={}",
                self.fairness_window, self.n
            )));
        }
        Ok(())
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> + Clone {
        ProcessId::all(self.n)
    }

    /// Quorum of ready attestations / stable reports: `f + 1`.
    pub fn quorum(&self) -> usize {
        self.f + 1
    }
}
