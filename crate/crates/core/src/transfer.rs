//! Asset transfer over the Byzantine snapshot.
//!
//! Each process's snapshot component is its segment: the list of transfer
//! records it has issued, each `⟨"xfer", seq, src, dst, amount⟩_src`.
//! Balances are a pure function of a snapshot (`settle`).

use std::collections::{BTreeMap, BTreeSet};

use crate::sim::{Call, Ctx, Hint, Label, LocalTask, ProcessId, Ret, SignedValue, Value};
use crate::snapshot::array::{entry_payload, parse_entry, ts_of};
use crate::snapshot::SnapNode;

const XFER: &[u8] = b"xfer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransferRecord {
    pub seq: u64,
    pub src: ProcessId,
    pub dst: ProcessId,
    pub amount: u64,
}

impl TransferRecord {
    pub fn payload(&self) -> Value {
        Value::list([
            Value::bytes(XFER),
            Value::Int(self.seq),
            Value::Int(u64::from(self.src.get())),
            Value::Int(u64::from(self.dst.get())),
            Value::Int(self.amount),
        ])
    }

    /// Parses a record signed by `src`.
    pub fn parse(
        v: &Value,
        src: ProcessId,
        n: usize,
        verify: &dyn Fn(&SignedValue) -> bool,
    ) -> Option<TransferRecord> {
        let sv = v.as_signed()?;
        if sv.signer() != src {
            return None;
        }
        let [kind, seq, s, d, amount] = sv.payload().as_list()? else {
            return None;
        };
        if kind.as_bytes()? != XFER {
            return None;
        }
        let pid = |x: &Value| ProcessId::checked(u32::try_from(x.as_int()?).ok()?, n).ok();
        let rec = TransferRecord {
            seq: seq.as_int().filter(|&s| s > 0)?,
            src: pid(s).filter(|&p| p == src)?,
            dst: pid(d)?,
            amount: amount.as_int().filter(|&a| a > 0)?,
        };
        verify(sv).then_some(rec)
    }
}

/// Result of settling one snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement {
    pub balances: Vec<u64>,
    /// Applied records in application order.
    pub applied: Vec<TransferRecord>,
}

/// Valid records of one segment, first valid record per seq.
pub fn segment_records(
    segment: &Value,
    src: ProcessId,
    n: usize,
    verify: &dyn Fn(&SignedValue) -> bool,
) -> BTreeMap<u64, TransferRecord> {
    let mut out = BTreeMap::new();
    for v in segment.as_list().unwrap_or(&[]) {
        if let Some(r) = TransferRecord::parse(v, src, n, verify) {
            out.entry(r.seq).or_insert(r);
        }
    }
    out
}

/// Applies funded records until nothing changes. Each source's records go in
/// seq order starting at 1; a missing seq blocks the rest of that source.
pub fn settle_records(initial: &[u64], segments: &[BTreeMap<u64, TransferRecord>]) -> Settlement {
    let mut balances = initial.to_vec();
    let mut next = vec![1u64; segments.len()];
    let mut applied = Vec::new();
    loop {
        let mut progress = false;
        for (k, seg) in segments.iter().enumerate() {
            while let Some(r) = seg.get(&next[k]) {
                if balances[k] < r.amount {
                    break;
                }
                balances[k] -= r.amount;
                balances[r.dst.index()] += r.amount;
                next[k] += 1;
                applied.push(*r);
                progress = true;
            }
        }
        if !progress {
            return Settlement { balances, applied };
        }
    }
}

/// Settles a sanitized snapshot array.
pub fn settle(snap: &[Value], initial: &[u64], verify: &dyn Fn(&SignedValue) -> bool) -> Settlement {
    let n = snap.len();
    let segments: Vec<_> = snap
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let owner = ProcessId::from_index(k);
            match parse_entry(e, owner, verify) {
                Some(entry) => segment_records(&entry.val, owner, n, verify),
                None => BTreeMap::new(),
            }
        })
        .collect();
    settle_records(initial, &segments)
}

/// One process of the asset-transfer object.
pub struct TransferNode {
    snap: SnapNode,
    initial: Vec<u64>,
    segment: Vec<Value>,
    hinted: BTreeSet<(ProcessId, u64)>,
}

impl TransferNode {
    pub fn new(snap: SnapNode, initial: Vec<u64>) -> Self {
        TransferNode {
            snap,
            initial,
            segment: Vec::new(),
            hinted: BTreeSet::new(),
        }
    }

    pub fn snap_mut(&mut self) -> &mut SnapNode {
        &mut self.snap
    }

    async fn settled(&mut self, ctx: &Ctx) -> Settlement {
        let s = self.snap.snapshot(ctx).await;
        let verify = |sv: &SignedValue| ctx.verify(sv);
        let settled = settle(&s, &self.initial, &verify);
        for r in &settled.applied {
            if self.hinted.insert((r.src, r.seq)) {
                ctx.hint(Hint {
                    process: r.src,
                    call: Call::Transfer {
                        src: r.src,
                        dst: r.dst,
                        amount: r.amount,
                    },
                    seq: r.seq,
                });
            }
        }
        settled
    }

    pub async fn transfer(&mut self, ctx: &Ctx, dst: ProcessId, amount: u64) -> bool {
        let me = self.snap.id();
        let settled = self.settled(ctx).await;
        if amount == 0 || settled.balances[me.index()] < amount {
            return false;
        }
        let rec = TransferRecord {
            seq: self.segment.len() as u64 + 1,
            src: me,
            dst,
            amount,
        };
        self.segment.push(Value::Signed(ctx.sign(rec.payload())));
        self.snap
            .update(ctx, Value::list(self.segment.iter().cloned()))
            .await;
        true
    }

    pub async fn read(&mut self, ctx: &Ctx, target: ProcessId) -> u64 {
        self.settled(ctx).await.balances[target.index()]
    }

    /// Runs `call` with history recording.
    pub async fn execute(&mut self, ctx: &Ctx, call: Call) -> Ret {
        ctx.invoke(call.clone()).await;
        let ret = match call {
            Call::Transfer { dst, amount, .. } => Ret::Bool(self.transfer(ctx, dst, amount).await),
            Call::Read(target) => Ret::Amount(self.read(ctx, target).await),
            other => panic!("asset transfer has no operation {other}"),
        };
        ctx.respond(ret.clone()).await;
        ret
    }
}

/// Byzantine source that publishes the given records regardless of its
/// balance, then goes quiet.
pub fn overspend(ctx: Ctx, records: Vec<(u64, ProcessId, u64)>) -> LocalTask {
    Box::pin(async move {
        let me = ctx.id();
        let n = ctx.n();
        let own = ctx.read(me, &Label::Collected).await;
        let mut arr: Vec<Value> = own
            .as_list()
            .filter(|l| l.len() == n)
            .map(<[Value]>::to_vec)
            .unwrap_or_else(|| vec![Value::Bottom; n]);
        let ts = ts_of(&arr[me.index()]) + 1;
        let segment = Value::list(records.into_iter().map(|(seq, dst, amount)| {
            let rec = TransferRecord {
                seq,
                src: me,
                dst,
                amount,
            };
            Value::Signed(ctx.sign(rec.payload()))
        }));
        arr[me.index()] = Value::Signed(ctx.sign(entry_payload(ts, segment)));
        ctx.write(Label::Collected, Value::list(arr)).await;
    })
}
