//! Collect arrays: `n` entries, each `⊥` or `⟨"entry", ts, val⟩_k` signed by
//! the coordinate's owner `k`. Arrays are compared coordinate-wise on `ts`,
//! with `⊥` counting as timestamp 0.

use std::cmp::Ordering;

use crate::codec::Encode;
use crate::sim::{ProcessId, SignedValue, Value};

const ENTRY: &[u8] = b"entry";

pub fn entry_payload(ts: u64, val: Value) -> Value {
    Value::list([Value::bytes(ENTRY), Value::Int(ts), val])
}

/// A verified entry of coordinate `owner`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub ts: u64,
    pub val: Value,
}

/// Parses `v` as a valid entry for coordinate `owner`.
pub fn parse_entry(v: &Value, owner: ProcessId, verify: &dyn Fn(&SignedValue) -> bool) -> Option<Entry> {
    let sv = v.as_signed()?;
    if sv.signer() != owner {
        return None;
    }
    let [kind, ts, val] = sv.payload().as_list()? else {
        return None;
    };
    if kind.as_bytes()? != ENTRY {
        return None;
    }
    let ts = ts.as_int().filter(|&t| t > 0)?;
    if !verify(sv) {
        return None;
    }
    Some(Entry { ts, val: val.clone() })
}

/// Timestamp of an entry already known to be valid or `⊥`.
pub fn ts_of(v: &Value) -> u64 {
    v.as_signed()
        .and_then(|sv| sv.payload().as_list())
        .and_then(|items| items.get(1))
        .and_then(Value::as_int)
        .unwrap_or(0)
}

/// Total order on the entries of one coordinate: by timestamp, then by
/// canonical encoding. `⊥` is the least element.
pub fn rank_cmp(a: &Value, b: &Value) -> Ordering {
    ts_of(a).cmp(&ts_of(b)).then_with(|| {
        if a == b {
            Ordering::Equal
        } else {
            a.to_bytes().cmp(&b.to_bytes())
        }
    })
}

/// `candidate` should replace `current` at the same coordinate.
pub fn supersedes(candidate: &Value, current: &Value) -> bool {
    rank_cmp(candidate, current) == Ordering::Greater
}

/// Replaces every invalid entry by `⊥`. Returns `None` unless `v` is a list
/// of exactly `n` items.
pub fn sanitize(v: &Value, n: usize, verify: &dyn Fn(&SignedValue) -> bool) -> Option<Vec<Value>> {
    let items = v.as_list()?;
    if items.len() != n {
        return None;
    }
    Some(
        items
            .iter()
            .enumerate()
            .map(|(k, e)| {
                if parse_entry(e, ProcessId::from_index(k), verify).is_some() {
                    e.clone()
                } else {
                    Value::Bottom
                }
            })
            .collect(),
    )
}

pub fn bottom(n: usize) -> Vec<Value> {
    vec![Value::Bottom; n]
}

/// Coordinate-wise maximum (in entry rank) of sanitized arrays.
pub fn supremum<'a>(n: usize, arrays: impl IntoIterator<Item = &'a [Value]>) -> Vec<Value> {
    let mut out = bottom(n);
    for a in arrays {
        for (k, e) in a.iter().enumerate() {
            if supersedes(e, &out[k]) {
                out[k] = e.clone();
            }
        }
    }
    out
}

/// Coordinate-wise minimum (in entry rank) of sanitized arrays.
pub fn infimum<'a>(arrays: impl IntoIterator<Item = &'a [Value]>) -> Option<Vec<Value>> {
    let mut iter = arrays.into_iter();
    let mut out = iter.next()?.to_vec();
    for a in iter {
        for (k, e) in a.iter().enumerate() {
            if rank_cmp(e, &out[k]) == Ordering::Less {
                out[k] = e.clone();
            }
        }
    }
    Some(out)
}

/// `a ≥ b` coordinate-wise in entry rank (which implies `≥` on timestamps).
pub fn geq(a: &[Value], b: &[Value]) -> bool {
    a.iter().zip(b).all(|(x, y)| rank_cmp(x, y) != Ordering::Less)
}

/// Timestamps of each coordinate.
pub fn stamps(a: &[Value]) -> Vec<u64> {
    a.iter().map(ts_of).collect()
}

/// `a ≥ b` or `b ≥ a` on timestamp vectors.
pub fn comparable(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) || a.iter().zip(b).all(|(x, y)| x <= y)
}

/// `(ts, val)` per coordinate, `None` for `⊥`.
pub fn view(a: &[Value]) -> Vec<Option<(u64, Value)>> {
    a.iter()
        .map(|e| {
            let sv = e.as_signed()?;
            let items = sv.payload().as_list()?;
            Some((items.get(1)?.as_int()?, items.get(2)?.clone()))
        })
        .collect()
}
