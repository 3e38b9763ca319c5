//! Per-step action log.
//!
//! Line format:
//! `step=<int> proc=<id> act=<read|write|local|sign> reg=<owner>/<label> val=<hex-digest> status=<ok|byz>`.
//! Local steps render their register as `<proc>/local` with a zero digest;
//! signing renders as `<signer>/sign` with the digest of the signed payload.

use std::fmt::Write as _;

use crate::sim::{Label, ProcessId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    /// Keep only the running fingerprint.
    #[default]
    Off,
    /// Keep every line.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Read,
    Write,
    Local,
    Sign,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Read => "read",
            Action::Write => "write",
            Action::Local => "local",
            Action::Sign => "sign",
        }
    }

    fn code(self) -> u64 {
        match self {
            Action::Read => 1,
            Action::Write => 2,
            Action::Local => 3,
            Action::Sign => 4,
        }
    }
}

#[derive(Debug, Default)]
pub struct Trace {
    mode: TraceMode,
    text: String,
    lines: usize,
    fingerprint: u64,
}

fn mix(h: u64, v: u64) -> u64 {
    // splitmix64 finalizer over the running state.
    let mut z = h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Trace {
    pub fn new(mode: TraceMode) -> Self {
        Trace {
            mode,
            ..Self::default()
        }
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        step: u64,
        proc: ProcessId,
        act: Action,
        owner: ProcessId,
        label: Option<&Label>,
        val: &Value,
        byz: bool,
    ) {
        let mut h = mix(self.fingerprint, step);
        h = mix(h, u64::from(proc.get()) << 8 | act.code() << 1 | u64::from(byz));
        self.fingerprint = mix(h, u64::from(owner.get()));
        self.lines += 1;
        if self.mode == TraceMode::Off {
            return;
        }
        let (reg, digest) = match (act, label) {
            (Action::Local, _) => (format!("{proc}/local"), 0),
            (Action::Sign, _) => (format!("{owner}/sign"), val.digest()),
            (_, Some(label)) => (format!("{owner}/{}", label.render(owner)), val.digest()),
            (_, None) => (format!("{owner}/?"), val.digest()),
        };
        let status = if byz { "byz" } else { "ok" };
        let _ = writeln!(
            self.text,
            "step={step} proc={proc} act={} reg={reg} val={digest:016x} status={status}",
            act.name()
        );
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    /// The full text; empty unless the mode is [`TraceMode::Full`].
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_shape() {
        let p = ProcessId::new(2);
        let mut t = Trace::new(TraceMode::Full);
        t.record(
            7,
            p,
            Action::Read,
            ProcessId::new(1),
            Some(&Label::Collected),
            &Value::Bottom,
            false,
        );
        t.record(8, p, Action::Local, p, None, &Value::Bottom, true);
        let lines: Vec<&str> = t.text().lines().collect();
        let bottom = Value::Bottom.digest();
        assert_eq!(
            lines[0],
            format!("step=7 proc=2 act=read reg=1/snap/collected_1 val={bottom:016x} status=ok")
        );
        assert_eq!(
            lines[1],
            "step=8 proc=2 act=local reg=2/local val=0000000000000000 status=byz"
        );
    }

    #[test]
    fn fingerprint_ignores_mode() {
        let p = ProcessId::new(1);
        let mut a = Trace::new(TraceMode::Full);
        let mut b = Trace::new(TraceMode::Off);
        for t in [&mut a, &mut b] {
            t.record(
                1,
                p,
                Action::Write,
                p,
                Some(&Label::named("x")),
                &Value::Int(3),
                false,
            );
        }
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert!(b.text().is_empty());
    }
}
