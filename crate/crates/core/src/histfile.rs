//! Text form of a history.
//!
//! ```text
//! object=snapshot n=3 byzantine=2@140
//! e=inv p=1 op=update args=0178 val=- step=4
//! e=res p=1 op=update args=0178 val=00 step=19
//! h p=2 op=transfer args=... seq=1
//! ```
//!
//! `args` is the hex canonical encoding of the call's arguments, `val` the
//! hex canonical encoding of the response. `byzantine` lists
//! `process@step` pairs or `-`. Asset-transfer headers carry
//! `initial=<b1,b2,...>`.

use std::collections::BTreeMap;

use crate::checker::ObjectKind;
use crate::codec::{Decode, Encode};
use crate::sim::{Call, EventKind, Hint, History, ProcessId, Ret};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn render(kind: &ObjectKind, n: usize, history: &History) -> String {
    let mut out = String::new();
    let byz = if history.corrupted.is_empty() {
        "-".to_string()
    } else {
        history
            .corrupted
            .iter()
            .map(|(p, s)| format!("{p}@{s}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    out.push_str(&format!("object={} n={n} byzantine={byz}", kind.name()));
    if let ObjectKind::Transfer { initial } = kind {
        let init: Vec<String> = initial.iter().map(u64::to_string).collect();
        out.push_str(&format!(" initial={}", init.join(",")));
    }
    out.push('\n');
    let mut open: BTreeMap<ProcessId, Call> = BTreeMap::new();
    for ev in &history.events {
        match &ev.kind {
            EventKind::Invocation(call) => {
                out.push_str(&format!(
                    "e=inv p={} op={} args={} val=- step={}\n",
                    ev.process,
                    call.name(),
                    hex::encode(call.args_bytes()),
                    ev.step
                ));
                open.insert(ev.process, call.clone());
            }
            EventKind::Response(ret) => {
                let (name, args) = open
                    .remove(&ev.process)
                    .map_or(("-", String::new()), |c| (c.name(), hex::encode(c.args_bytes())));
                out.push_str(&format!(
                    "e=res p={} op={name} args={args} val={} step={}\n",
                    ev.process,
                    hex::encode(ret.to_bytes()),
                    ev.step
                ));
            }
        }
    }
    for h in &history.hints {
        out.push_str(&format!(
            "h p={} op={} args={} seq={}\n",
            h.process,
            h.call.name(),
            hex::encode(h.call.args_bytes()),
            h.seq
        ));
    }
    out
}

struct Fields<'a> {
    line: usize,
    text: &'a str,
    pairs: Vec<(usize, &'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn split(line: usize, text: &'a str) -> Result<Self, ParseError> {
        let mut pairs = Vec::new();
        let mut offset = 0;
        for tok in text.split(' ') {
            let column = offset + 1;
            offset += tok.len() + 1;
            if tok.is_empty() {
                continue;
            }
            match tok.split_once('=') {
                Some((k, v)) => pairs.push((column, k, v)),
                None if tok == "h" => pairs.push((column, "h", "")),
                None => {
                    return Err(ParseError {
                        line,
                        column,
                        message: format!("expected key=value, found `{tok}`"),
                    })
                }
            }
        }
        Ok(Fields { line, text, pairs })
    }

    fn err(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn get(&self, key: &str) -> Result<(usize, &'a str), ParseError> {
        self.pairs
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(c, _, v)| (*c, *v))
            .ok_or_else(|| self.err(self.text.len() + 1, format!("missing field `{key}`")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ParseError> {
        let (c, v) = self.get(key)?;
        v.parse()
            .map_err(|_| self.err(c, format!("`{key}` is not a number")))
    }

    fn process(&self, key: &str, n: usize) -> Result<ProcessId, ParseError> {
        let (c, _) = self.get(key)?;
        let id: u32 = self.num(key)?;
        ProcessId::checked(id, n).map_err(|e| self.err(c, e.to_string()))
    }

    fn hex(&self, key: &str) -> Result<Vec<u8>, ParseError> {
        let (c, v) = self.get(key)?;
        hex::decode(v).map_err(|_| self.err(c, format!("`{key}` is not hex")))
    }

    fn call(&self) -> Result<Call, ParseError> {
        let (c, name) = self.get("op")?;
        let args = self.hex("args")?;
        Call::from_parts(name, &args).map_err(|e| self.err(c, format!("bad operation: {e}")))
    }
}

pub fn parse(text: &str) -> Result<(ObjectKind, usize, History), ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((hl, header)) = lines.next() else {
        return Err(ParseError {
            line: 1,
            column: 1,
            message: "empty history file".into(),
        });
    };
    let head = Fields::split(hl, header)?;
    let n: usize = head.num("n")?;
    if n == 0 {
        return Err(head.err(head.get("n")?.0, "n must be positive"));
    }
    let (oc, object) = head.get("object")?;
    let kind = match object {
        "register" => ObjectKind::Register,
        "rbcast" => ObjectKind::Rbcast,
        "snapshot" => ObjectKind::Snapshot { n },
        "asset-transfer" => {
            let (ic, init) = head.get("initial")?;
            let initial = init
                .split(',')
                .map(str::parse)
                .collect::<Result<Vec<u64>, _>>()
                .map_err(|_| head.err(ic, "bad initial balances"))?;
            if initial.len() != n {
                return Err(head.err(ic, format!("expected {n} initial balances")));
            }
            ObjectKind::Transfer { initial }
        }
        other => return Err(head.err(oc, format!("unknown object `{other}`"))),
    };
    let mut history = History::default();
    let (bc, byz) = head.get("byzantine")?;
    if byz != "-" {
        for item in byz.split(',') {
            let (p, s) = item.split_once('@').unwrap_or((item, "0"));
            let p = p
                .parse()
                .ok()
                .and_then(|p| ProcessId::checked(p, n).ok())
                .ok_or_else(|| head.err(bc, format!("bad process `{p}`")))?;
            let s = s.parse().map_err(|_| head.err(bc, format!("bad step `{s}`")))?;
            history.corrupted.insert(p, s);
        }
    }
    for (ln, line) in lines {
        let fields = Fields::split(ln, line)?;
        if fields.pairs.first().is_some_and(|(_, k, _)| *k == "h") {
            history.hints.push(Hint {
                process: fields.process("p", n)?,
                call: fields.call()?,
                seq: fields.num("seq")?,
            });
            continue;
        }
        let process = fields.process("p", n)?;
        let step = fields.num("step")?;
        let (ec, e) = fields.get("e")?;
        match e {
            "inv" => history.invoke(process, fields.call()?, step),
            "res" => {
                let (vc, _) = fields.get("val")?;
                let bytes = fields.hex("val")?;
                let ret =
                    Ret::from_bytes(&bytes).map_err(|e| fields.err(vc, format!("bad response: {e}")))?;
                history.respond(process, ret, step);
            }
            other => return Err(fields.err(ec, format!("unknown event `{other}`"))),
        }
    }
    Ok((kind, n, history))
}
