//! Snapshot-aux messages and validation of stored snapshots.
//!
//! Round 0 carries the sender's collect array (`["start", array]`); round
//! `r ≥ 1` carries the set of processes whose start messages the sender has
//! received (`["senders", [ids]]`). A stored snapshot is
//! `[snap, [certificate, ...]]` where each certificate is a reliable
//! broadcast delivery certificate from the instance's broadcast.

use std::collections::{BTreeMap, BTreeSet};

use crate::rbcast::{instance_key, parse_certificate};
use crate::sim::{Instance, ProcessId, SignedValue, Value};
use crate::snapshot::array::{sanitize, supremum};

const START: &[u8] = b"start";
const SENDERS: &[u8] = b"senders";

pub fn start_value(collect: &[Value]) -> Value {
    Value::list([Value::bytes(START), Value::list(collect.iter().cloned())])
}

pub fn senders_value(senders: &BTreeSet<ProcessId>) -> Value {
    Value::list([
        Value::bytes(SENDERS),
        Value::list(senders.iter().map(|p| Value::Int(u64::from(p.get())))),
    ])
}

/// The collect array inside a start message, sanitized.
pub fn parse_start(v: &Value, n: usize, verify: &dyn Fn(&SignedValue) -> bool) -> Option<Vec<Value>> {
    let [kind, arr] = v.as_list()? else {
        return None;
    };
    if kind.as_bytes()? != START {
        return None;
    }
    sanitize(arr, n, verify)
}

pub fn parse_senders(v: &Value, n: usize) -> Option<BTreeSet<ProcessId>> {
    let [kind, ids] = v.as_list()? else {
        return None;
    };
    if kind.as_bytes()? != SENDERS {
        return None;
    }
    ids.as_list()?
        .iter()
        .map(|id| {
            let id = u32::try_from(id.as_int()?).ok()?;
            ProcessId::checked(id, n).ok()
        })
        .collect()
}

pub fn savesnap_value(snap: &[Value], proof: impl IntoIterator<Item = Value>) -> Value {
    Value::list([Value::list(snap.iter().cloned()), Value::list(proof)])
}

/// Splits a stored snapshot into its array and proof certificates.
pub fn parse_savesnap(v: &Value) -> Option<(&[Value], &[Value])> {
    let [snap, proof] = v.as_list()? else {
        return None;
    };
    Some((snap.as_list()?, proof.as_list()?))
}

/// Checks that `proof` establishes `snap` as a stability-condition result of
/// snapshot-aux instance `auxnum`:
/// * every certificate is valid and belongs to that instance's broadcast,
///   and no two certify different values for one `(sender, round)`;
/// * for some round `r` there is a group `S`, `|S| ≥ f+1`, whose members'
///   cumulative round-1..r sender sets all equal one set `S′ ⊇ S`;
/// * the proof holds a start message from every member of `S′`;
/// * `snap` is exactly the supremum of those start arrays.
pub fn verify_savesnap_proof(
    snap: &[Value],
    proof: &[Value],
    auxnum: u64,
    n: usize,
    f: usize,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> bool {
    if snap.len() != n {
        return false;
    }
    let key = instance_key(&Instance::SnapAux(auxnum));
    let mut msgs: BTreeMap<(ProcessId, u64), Value> = BTreeMap::new();
    for cert in proof {
        let Some(m) = parse_certificate(cert, &key, f + 1, verify) else {
            return false;
        };
        match msgs.get(&(m.sender, m.ts)) {
            Some(prev) if *prev != m.val => return false,
            Some(_) => {}
            None => {
                msgs.insert((m.sender, m.ts), m.val);
            }
        }
    }
    let mut starts: BTreeMap<ProcessId, Vec<Value>> = BTreeMap::new();
    let mut cumulative: BTreeMap<ProcessId, Vec<BTreeSet<ProcessId>>> = BTreeMap::new();
    for ((p, ts), val) in &msgs {
        if *ts == 0 {
            if let Some(arr) = parse_start(val, n, verify) {
                starts.insert(*p, arr);
            }
            continue;
        }
        // Rounds must be contiguous from 1; later rounds after a gap are
        // unusable.
        let chain = cumulative.entry(*p).or_default();
        if chain.len() as u64 + 1 != *ts {
            continue;
        }
        let Some(js) = parse_senders(val, n) else {
            continue;
        };
        let mut acc = chain.last().cloned().unwrap_or_default();
        acc.extend(js);
        chain.push(acc);
    }
    let max_round = cumulative.values().map(Vec::len).max().unwrap_or(0);
    for r in 1..=max_round {
        let mut groups: BTreeMap<&BTreeSet<ProcessId>, BTreeSet<ProcessId>> = BTreeMap::new();
        for (p, chain) in &cumulative {
            if let Some(set) = chain.get(r - 1) {
                groups.entry(set).or_default().insert(*p);
            }
        }
        for (common, members) in groups {
            if members.len() < f + 1 || !members.is_subset(common) {
                continue;
            }
            let Some(arrays) = common
                .iter()
                .map(|q| starts.get(q).map(Vec::as_slice))
                .collect::<Option<Vec<_>>>()
            else {
                continue;
            };
            if supremum(n, arrays) == snap {
                return true;
            }
        }
    }
    false
}
