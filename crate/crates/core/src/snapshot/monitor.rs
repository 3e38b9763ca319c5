use std::collections::BTreeMap;

use crate::sim::{Label, Monitor, ProcessId, SignedValue, Violation, World, WriteEvent};
use crate::snapshot::array::{parse_entry, sanitize, ts_of};

/// Checks on every correct write to a `collected` register: the writer's own
/// coordinate carries the highest timestamp it has signed so far, and no
/// coordinate's timestamp goes backwards.
#[derive(Default)]
pub struct SnapMonitor {
    /// Highest own-entry timestamp seen per signer.
    highest: BTreeMap<ProcessId, u64>,
}

impl SnapMonitor {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Monitor for SnapMonitor {
    fn on_write(&mut self, ev: &WriteEvent<'_>, world: &World, out: &mut Vec<Violation>) {
        if *ev.label != Label::Collected {
            return;
        }
        let n = world.config().n;
        let verify = |sv: &SignedValue| world.verify(sv);
        if let Some(items) = ev.new.as_list().filter(|l| l.len() == n) {
            for (k, e) in items.iter().enumerate() {
                let owner = ProcessId::from_index(k);
                if let Some(entry) = parse_entry(e, owner, &verify) {
                    let h = self.highest.entry(owner).or_default();
                    *h = (*h).max(entry.ts);
                }
            }
        }
        if ev.byzantine {
            return;
        }
        let Some(new) = sanitize(ev.new, n, &verify) else {
            out.push(Violation {
                step: ev.step,
                check: "collect-wellformed",
                detail: format!("process {} wrote a malformed collect array", ev.writer),
            });
            return;
        };
        let own = ts_of(&new[ev.writer.index()]);
        let highest = self.highest.get(&ev.writer).copied().unwrap_or(0);
        if own != highest {
            out.push(Violation {
                step: ev.step,
                check: "own-entry-latest",
                detail: format!(
                    "process {} holds own timestamp {own} but has signed {highest}",
                    ev.writer
                ),
            });
        }
        let old = sanitize(ev.old, n, &verify).unwrap_or_else(|| vec![crate::sim::Value::Bottom; n]);
        if let Some(k) = (0..n).find(|&k| ts_of(&new[k]) < ts_of(&old[k])) {
            out.push(Violation {
                step: ev.step,
                check: "collect-monotone",
                detail: format!(
                    "process {} lowered coordinate {} from {} to {}",
                    ev.writer,
                    ProcessId::from_index(k),
                    ts_of(&old[k]),
                    ts_of(&new[k])
                ),
            });
        }
    }
}
