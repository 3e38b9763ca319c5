use std::collections::{BTreeMap, BTreeSet};

use crate::sim::{Call, ProcessId, Ret, RunStatus};
use crate::snapshot::array::{comparable, geq, stamps};
use crate::transfer::TransferRecord;

use super::run::RunReport;
use super::{Expectation, Scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: String, failure: Option<String>) -> ExpectResult {
    ExpectResult {
        name,
        passed: failure.is_none(),
        detail: failure.unwrap_or_default(),
    }
}

pub fn evaluate(scenario: &Scenario, report: &RunReport) -> Vec<ExpectResult> {
    scenario
        .expect
        .iter()
        .map(|e| verdict(e.name(), failure(e, scenario, report)))
        .collect()
}

fn failure(e: &Expectation, scenario: &Scenario, report: &RunReport) -> Option<String> {
    let outcome = &report.outcome;
    let byz: BTreeSet<ProcessId> = outcome.corrupted.keys().copied().collect();
    let correct = |p: &ProcessId| !byz.contains(p);
    let ops = outcome
        .history
        .project_correct(&byz)
        .operations()
        .expect("simulator histories are well formed");
    match e {
        Expectation::AllComplete => {
            let missing: Vec<usize> = scenario
                .ops
                .iter()
                .zip(&report.obs.done)
                .enumerate()
                .filter(|(_, (op, done))| correct(&op.process) && !**done)
                .map(|(i, _)| i + 1)
                .collect();
            if missing.is_empty() && outcome.status == RunStatus::Stopped {
                None
            } else {
                Some(format!(
                    "status {} after {} steps, unfinished ops {missing:?}",
                    outcome.status.name(),
                    outcome.steps
                ))
            }
        }
        Expectation::NeverCompletes(name) => {
            let done = ops
                .iter()
                .filter(|o| o.call.name() == name && !o.is_pending())
                .count();
            (done > 0).then(|| format!("{done} {name} operation(s) completed"))
        }
        Expectation::CheckerPass => match &report.check {
            Some(c) if c.verdict.is_linearizable() => None,
            Some(c) => Some(c.to_string().lines().next().unwrap_or_default().to_string()),
            None => Some("checker did not run".into()),
        },
        Expectation::Invariants => {
            let v = &outcome.violations;
            (!v.is_empty()).then(|| format!("{} violation(s), first: {}", v.len(), v[0]))
        }
        Expectation::Agreement => {
            let mut slots: BTreeMap<(ProcessId, u64), BTreeSet<Vec<u8>>> = BTreeMap::new();
            for d in report.obs.deliveries.iter().filter(|d| correct(&d.by)) {
                slots
                    .entry((d.from, d.ts))
                    .or_default()
                    .insert(crate::codec::Encode::to_bytes(&d.val));
            }
            slots
                .iter()
                .find(|(_, vals)| vals.len() > 1)
                .map(|((j, ts), vals)| format!("{} values delivered for ({j}, {ts})", vals.len()))
        }
        Expectation::SnapshotOrder => snapshot_order(report, &byz),
        Expectation::SnapshotVisibility => snapshot_visibility(report, &byz),
        Expectation::Conservation => conservation(scenario, report, &byz),
        Expectation::NeverReads(v) => {
            let bad = ops
                .iter()
                .filter(|o| matches!(o.call, Call::Read(_)) && o.ret == Some(Ret::Amount(*v)))
                .count();
            (bad > 0).then(|| format!("{bad} read(s) returned {v}"))
        }
        Expectation::TrueTransfers(k) => {
            let t = ops
                .iter()
                .filter(|o| matches!(o.call, Call::Transfer { .. }) && o.ret == Some(Ret::Bool(true)))
                .count();
            (t != *k).then(|| format!("{t} transfers returned true"))
        }
    }
}

fn snapshot_order(report: &RunReport, byz: &BTreeSet<ProcessId>) -> Option<String> {
    let snaps: Vec<_> = report
        .obs
        .snapshots
        .iter()
        .filter(|s| !byz.contains(&s.process))
        .collect();
    let ts: Vec<Vec<u64>> = snaps.iter().map(|s| stamps(&s.array)).collect();
    for (a, sa) in snaps.iter().enumerate() {
        for (b, sb) in snaps.iter().enumerate().skip(a + 1) {
            if !comparable(&ts[a], &ts[b]) {
                return Some(format!(
                    "snapshots of p{} and p{} are incomparable: {:?} vs {:?}",
                    sa.process, sb.process, ts[a], ts[b]
                ));
            }
            if !geq(&sa.array, &sb.array) && !geq(&sb.array, &sa.array) {
                return Some(format!(
                    "snapshots of p{} and p{} disagree on an equal timestamp",
                    sa.process, sb.process
                ));
            }
            for (x, y) in [(sa, sb), (sb, sa)] {
                if x.responded < y.invoked && !geq(&y.array, &x.array) {
                    return Some(format!(
                        "snapshot of p{} at {} is below an earlier one of p{} ending at {}",
                        y.process, y.invoked, x.process, x.responded
                    ));
                }
            }
        }
    }
    None
}

fn snapshot_visibility(report: &RunReport, byz: &BTreeSet<ProcessId>) -> Option<String> {
    let updates: Vec<_> = report
        .obs
        .updates
        .iter()
        .filter(|u| !byz.contains(&u.process))
        .collect();
    for s in report.obs.snapshots.iter().filter(|s| !byz.contains(&s.process)) {
        let ts = stamps(&s.array);
        let sees = |u: &&crate::scenario::UpdateDone| ts[u.process.index()] >= u.ts;
        for u in &updates {
            if u.responded < s.invoked && !sees(u) {
                return Some(format!(
                    "snapshot of p{} from step {} misses update {} of p{} done at {}",
                    s.process, s.invoked, u.ts, u.process, u.responded
                ));
            }
        }
        for u1 in &updates {
            for u2 in &updates {
                if u1.responded < u2.invoked && sees(u2) && !sees(u1) {
                    return Some(format!(
                        "snapshot of p{} sees update {} of p{} but not the earlier update {} of p{}",
                        s.process, u2.ts, u2.process, u1.ts, u1.process
                    ));
                }
            }
        }
    }
    None
}

fn conservation(scenario: &Scenario, report: &RunReport, byz: &BTreeSet<ProcessId>) -> Option<String> {
    let total: u64 = scenario.initial.iter().sum();
    let mut applied: BTreeMap<(ProcessId, u64), TransferRecord> = BTreeMap::new();
    for (s, settled) in report.obs.snapshots.iter().zip(&report.obs.settlements) {
        if byz.contains(&s.process) {
            continue;
        }
        let sum: u64 = settled.balances.iter().sum();
        if sum != total {
            return Some(format!(
                "balances of a snapshot of p{} sum to {sum}, not {total}",
                s.process
            ));
        }
        for r in &settled.applied {
            if let Some(prev) = applied.insert((r.src, r.seq), *r) {
                if prev != *r {
                    return Some(format!("record {} of p{} applied in two forms", r.seq, r.src));
                }
            }
        }
    }
    None
}
