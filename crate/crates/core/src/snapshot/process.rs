use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::rbcast::RbNode;
use crate::sim::{Ctx, Instance, Label, ProcessId, SignedValue, Value};
use crate::snapshot::array::{entry_payload, geq, infimum, sanitize, supersedes, supremum};
use crate::snapshot::proof::{
    parse_savesnap, parse_senders, parse_start, savesnap_value, senders_value, start_value,
    verify_savesnap_proof,
};

/// Re-deliveries of a malformed message before it is consumed unused.
const MALFORMED_PATIENCE: u32 = 3;

/// Observer hooks for the harness.
pub trait SnapObserver {
    fn aux_returned(&self, _by: ProcessId, _auxnum: u64, _snap: &[Value]) {}
    fn update_done(&self, _by: ProcessId, _ts: u64, _invoked: u64, _responded: u64) {}
    fn snapshot_done(&self, _by: ProcessId, _invoked: u64, _responded: u64, _snap: &[Value]) {}
}

/// Per-instance state of one snapshot-aux invocation.
struct Aux {
    auxnum: u64,
    rb: RbNode,
    sigma: Vec<Value>,
    senders: BTreeSet<ProcessId>,
    seen: HashMap<(ProcessId, u64), BTreeSet<ProcessId>>,
    rts: Vec<u64>,
    round: u64,
    count: BTreeMap<u64, usize>,
    malformed: Vec<u32>,
    starts: BTreeMap<ProcessId, Vec<Value>>,
    verified: Vec<(Value, bool)>,
}

impl Aux {
    fn add_proof(&mut self, cert: Value) {
        if !self.sigma.contains(&cert) {
            self.sigma.push(cert);
        }
    }

    fn stable(&self, quorum: usize) -> bool {
        let mut per_round: BTreeMap<u64, usize> = BTreeMap::new();
        for ((_, r), set) in &self.seen {
            if *set == self.senders {
                *per_round.entry(*r).or_default() += 1;
            }
        }
        per_round.values().any(|&c| c >= quorum)
    }
}

/// One process of the Byzantine snapshot object.
pub struct SnapNode {
    me: ProcessId,
    n: usize,
    f: usize,
    collect: Vec<Value>,
    ts: u64,
    auxnum: u64,
    cursor: usize,
    observer: Option<Rc<dyn SnapObserver>>,
}

impl SnapNode {
    pub fn new(me: ProcessId, n: usize, f: usize) -> Self {
        SnapNode {
            me,
            n,
            f,
            collect: vec![Value::Bottom; n],
            ts: 0,
            auxnum: 0,
            cursor: 1,
            observer: None,
        }
    }

    pub fn with_observer(mut self, observer: Rc<dyn SnapObserver>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn id(&self) -> ProcessId {
        self.me
    }

    /// This process's collect array (mirrors its `collected` register).
    pub fn collect(&self) -> &[Value] {
        &self.collect
    }

    /// Timestamp of this process's latest update.
    pub fn ts(&self) -> u64 {
        self.ts
    }

    pub fn auxnum(&self) -> u64 {
        self.auxnum
    }

    /// Writes `val` as this process's component. Returns its timestamp.
    pub async fn update(&mut self, ctx: &Ctx, val: Value) -> u64 {
        let invoked = ctx.step();
        self.collect_all(ctx).await;
        self.ts += 1;
        self.collect[self.me.index()] = Value::Signed(ctx.sign(entry_payload(self.ts, val)));
        ctx.write(Label::Collected, Value::list(self.collect.iter().cloned()))
            .await;
        if let Some(obs) = &self.observer {
            obs.update_done(self.me, self.ts, invoked, ctx.step());
        }
        self.ts
    }

    pub async fn snapshot(&mut self, ctx: &Ctx) -> Vec<Value> {
        let invoked = ctx.step();
        self.collect_all(ctx).await;
        let c = self.collect.clone();
        loop {
            self.auxnum += 1;
            let snap = self.snapshot_aux(ctx, self.auxnum).await;
            if geq(&snap, &c) {
                if let Some(obs) = &self.observer {
                    obs.snapshot_done(self.me, invoked, ctx.step(), &snap);
                }
                return snap;
            }
        }
    }

    /// Merges every other process's `collected` register into ours.
    async fn collect_all(&mut self, ctx: &Ctx) {
        for j in ProcessId::all(self.n) {
            if j == self.me {
                continue;
            }
            let raw = ctx.read(j, &Label::Collected).await;
            let verify = |sv: &SignedValue| ctx.verify(sv);
            if let Some(c) = sanitize(&raw, self.n, &verify) {
                self.update_collect(ctx, &c).await;
            }
        }
    }

    /// Adopts each entry of the sanitized array `c` that supersedes ours.
    async fn update_collect(&mut self, ctx: &Ctx, c: &[Value]) {
        let mut changed = false;
        for (k, e) in c.iter().enumerate() {
            if supersedes(e, &self.collect[k]) {
                self.collect[k] = e.clone();
                changed = true;
            }
        }
        if changed {
            ctx.write(Label::Collected, Value::list(self.collect.iter().cloned()))
                .await;
        }
    }

    async fn snapshot_aux(&mut self, ctx: &Ctx, auxnum: u64) -> Vec<Value> {
        let snap = self.run_aux(ctx, auxnum).await;
        if let Some(obs) = &self.observer {
            obs.aux_returned(self.me, auxnum, &snap);
        }
        snap
    }

    async fn run_aux(&mut self, ctx: &Ctx, auxnum: u64) -> Vec<Value> {
        let n = self.n;
        let quorum = self.f + 1;
        let mut aux = Aux {
            auxnum,
            rb: RbNode::new(self.me, n, self.f, Instance::SnapAux(auxnum)),
            sigma: Vec::new(),
            senders: BTreeSet::from([self.me]),
            seen: HashMap::new(),
            rts: vec![0; n],
            round: 0,
            count: BTreeMap::new(),
            malformed: vec![0; n],
            starts: BTreeMap::new(),
            verified: Vec::new(),
        };
        self.collect_all(ctx).await;
        aux.starts.insert(self.me, self.collect.clone());
        if let Some(saved) = self
            .aux_broadcast(ctx, &mut aux, 0, start_value(&self.collect))
            .await
        {
            return saved;
        }
        loop {
            if let Some(saved) = self.minimum_saved(ctx, &mut aux).await {
                return saved;
            }
            self.cursor = self.cursor % n + 1;
            let p = ProcessId::from_index(self.cursor - 1);
            let rts = aux.rts[p.index()];
            let Some(m) = aux.rb.deliver(ctx, p, rts).await else {
                continue;
            };
            let cert = aux
                .rb
                .certificate_for(p, rts)
                .expect("delivered messages have certificates")
                .clone();
            let verify = |sv: &SignedValue| ctx.verify(sv);
            let start = if rts == 0 {
                parse_start(&m, n, &verify)
            } else {
                None
            };
            let jsenders = if rts > 0 { parse_senders(&m, n) } else { None };
            if let Some(arr) = start {
                aux.add_proof(cert);
                self.update_collect(ctx, &arr).await;
                aux.senders.insert(p);
                aux.starts.insert(p, arr);
                *aux.count.entry(0).or_default() += 1;
                self.check_supremum(ctx, &aux);
            } else if let Some(js) = jsenders {
                if !js.is_subset(&aux.senders) {
                    continue;
                }
                aux.add_proof(cert);
                let mut acc = aux.seen.get(&(p, rts - 1)).cloned().unwrap_or_default();
                acc.extend(js);
                aux.seen.insert((p, rts), acc);
                *aux.count.entry(rts).or_default() += 1;
            } else {
                aux.malformed[p.index()] += 1;
                if aux.malformed[p.index()] <= MALFORMED_PATIENCE {
                    continue;
                }
                aux.malformed[p.index()] = 0;
            }
            aux.rts[p.index()] += 1;
            while aux.count.get(&aux.round).copied().unwrap_or(0) >= quorum {
                aux.round += 1;
                let round = aux.round;
                let msg = senders_value(&aux.senders);
                if let Some(saved) = self.aux_broadcast(ctx, &mut aux, round, msg).await {
                    return saved;
                }
            }
            if aux.stable(quorum) {
                if let Some(saved) = self.minimum_saved(ctx, &mut aux).await {
                    return saved;
                }
                let entry = savesnap_value(&self.collect, aux.sigma.iter().cloned());
                ctx.write(Label::SaveSnap(auxnum), entry).await;
                return self.collect.clone();
            }
        }
    }

    /// Broadcasts in the instance and waits until the message is
    /// deliverable, unless a stored snapshot for the instance appears first.
    async fn aux_broadcast(
        &mut self,
        ctx: &Ctx,
        aux: &mut Aux,
        round: u64,
        val: Value,
    ) -> Option<Vec<Value>> {
        aux.rb.publish(ctx, round, val).await;
        loop {
            if let Some(saved) = self.minimum_saved(ctx, aux).await {
                return Some(saved);
            }
            if aux.rb.deliver(ctx, self.me, round).await.is_some() {
                let cert = aux.rb.certificate_for(self.me, round).expect("delivered").clone();
                aux.add_proof(cert);
                return None;
            }
        }
    }

    /// Reads every stored snapshot of the instance; if any carries a valid
    /// proof, stores and adopts the infimum of the valid ones.
    async fn minimum_saved(&mut self, ctx: &Ctx, aux: &mut Aux) -> Option<Vec<Value>> {
        let label = Label::SaveSnap(aux.auxnum);
        let mut valid: Vec<Value> = Vec::new();
        for j in ProcessId::all(self.n) {
            if j == self.me {
                continue;
            }
            let raw = ctx.read(j, &label).await;
            if raw.is_bottom() {
                continue;
            }
            let ok = match aux.verified.iter().find(|(v, _)| *v == raw) {
                Some((_, ok)) => *ok,
                None => {
                    let verify = |sv: &SignedValue| ctx.verify(sv);
                    let ok = parse_savesnap(&raw).is_some_and(|(snap, proof)| {
                        verify_savesnap_proof(snap, proof, aux.auxnum, self.n, self.f, &verify)
                    });
                    aux.verified.push((raw.clone(), ok));
                    ok
                }
            };
            if ok {
                valid.push(raw);
            }
        }
        if valid.is_empty() {
            return None;
        }
        let parsed: Vec<(&[Value], &[Value])> = valid.iter().filter_map(parse_savesnap).collect();
        let res = infimum(parsed.iter().map(|(s, _)| *s)).expect("non-empty");
        if !parsed.iter().any(|(s, _)| *s == res.as_slice()) {
            ctx.report(
                "minimum-saved",
                format!(
                    "process {} took an infimum of {} incomparable stored snapshots in instance {}",
                    self.me,
                    parsed.len(),
                    aux.auxnum
                ),
            );
        }
        let mut proof: Vec<Value> = Vec::new();
        for (_, p) in &parsed {
            for cert in p.iter() {
                if !proof.contains(cert) {
                    proof.push(cert.clone());
                }
            }
        }
        ctx.write(label, savesnap_value(&res, proof)).await;
        self.update_collect(ctx, &res).await;
        Some(res)
    }

    /// Online check: the collect equals the supremum of the start arrays of
    /// the current senders.
    fn check_supremum(&self, ctx: &Ctx, aux: &Aux) {
        let expected = supremum(
            self.n,
            aux.senders
                .iter()
                .filter_map(|p| aux.starts.get(p).map(Vec::as_slice)),
        );
        if expected != self.collect {
            ctx.report(
                "collect-supremum",
                format!(
                    "process {} collect differs from the supremum of its senders' starts in instance {}",
                    self.me, aux.auxnum
                ),
            );
        }
    }
}
