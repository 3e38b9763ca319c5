use crate::rbcast::{echo_payload, message_payload, ready_payload};
use crate::sim::{Ctx, Instance, Label, LocalTask, ProcessId, RbVar, Value};
use crate::snapshot::array::{bottom, entry_payload};
use crate::snapshot::proof::{parse_savesnap, savesnap_value, senders_value, start_value};

/// Byzantine snapshot participant. It keeps two different entries under the
/// same timestamp for its own coordinate, equivocates start and sender-set
/// messages in whichever snapshot-aux instance the correct processes have
/// reached, and stores doctored snapshots with borrowed or empty proofs.
pub fn twisted(ctx: Ctx, values: [Value; 2]) -> LocalTask {
    Box::pin(async move {
        let n = ctx.n();
        let me = ctx.id();
        let mut ts = 0;
        let mut auxnum = 1;
        loop {
            ts += 1;
            let arrays: Vec<Vec<Value>> = values
                .iter()
                .map(|v| {
                    let mut a = bottom(n);
                    a[me.index()] = Value::Signed(ctx.sign(entry_payload(ts, v.clone())));
                    a
                })
                .collect();
            for a in &arrays {
                ctx.write(Label::Collected, Value::list(a.iter().cloned())).await;
            }

            // Follow the correct processes to the newest instance.
            for j in ProcessId::all(n) {
                if j == me {
                    continue;
                }
                let next = Instance::SnapAux(auxnum + 1);
                if !ctx.read(j, &Label::rb(&next, RbVar::Send)).await.is_bottom() {
                    auxnum += 1;
                }
            }
            let inst = Instance::SnapAux(auxnum);
            let everyone = ProcessId::all(n).collect();
            let alone = [me].into_iter().collect();
            let mut msgs = Vec::new();
            for a in &arrays {
                msgs.push(ctx.sign(message_payload(&inst, 0, start_value(a))));
            }
            for set in [&everyone, &alone] {
                msgs.push(ctx.sign(message_payload(&inst, 1, senders_value(set))));
            }
            let ready = Value::list(msgs.iter().map(|m| Value::Signed(ctx.sign(ready_payload(m)))));
            ctx.write(Label::rb(&inst, RbVar::Ready), ready).await;
            for m in &msgs {
                ctx.write(Label::rb(&inst, RbVar::Send), Value::Signed(m.clone()))
                    .await;
                let echo = Value::list([Value::Signed(ctx.sign(echo_payload(m)))]);
                ctx.write(Label::rb(&inst, RbVar::Echo), echo).await;
            }

            // Doctor someone else's stored snapshot, or store one with no proof.
            let mut doctored = savesnap_value(&arrays[0], []);
            for j in ProcessId::all(n) {
                if j == me {
                    continue;
                }
                let raw = ctx.read(j, &Label::SaveSnap(auxnum)).await;
                if let Some((snap, proof)) = parse_savesnap(&raw) {
                    let mut snap = snap.to_vec();
                    snap[me.index()] = arrays[1][me.index()].clone();
                    doctored = savesnap_value(&snap, proof.iter().cloned());
                    break;
                }
            }
            ctx.write(Label::SaveSnap(auxnum), doctored).await;
        }
    })
}
