//! Line-oriented scenario text.
//!
//! ```text
//! name = rbcast-happy
//! object = rbcast
//! n = 3
//! f = 1
//!
//! [op]
//! p = 1
//! call = broadcast 1 hello
//!
//! [adversary]
//! p = 3
//! strategy = crash-silent
//! at = 0
//!
//! [expect]
//! all-complete
//! checker-pass
//! ```
//!
//! Top-level keys: `name`, `object` (`register`, `rbcast`, `snapshot`,
//! `asset-transfer`), `n`, `f`, `seed`, `max_steps`, `window`, `drain`,
//! `budget`, `initial` (comma-separated balances, asset transfer only).
//! `#` starts a comment.

use std::collections::BTreeSet;

use crate::checker::DEFAULT_BUDGET;
use crate::sim::{Call, ProcessId, SystemConfig, DEFAULT_MAX_STEPS};

use super::{AdversarySpec, Expectation, Object, OpSpec, Scenario, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn err(self, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Op,
    Adversary,
    Expect,
}

struct Entry<'a> {
    key: &'a str,
    value: Option<&'a str>,
    key_pos: Pos,
    value_pos: Pos,
}

struct Block<'a> {
    kind: Section,
    pos: Pos,
    entries: Vec<Entry<'a>>,
}

impl<'a> Block<'a> {
    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn required(&self, key: &str) -> Result<(&'a str, Pos), ScenarioError> {
        match self.get(key) {
            Some(Entry {
                value: Some(v),
                value_pos,
                ..
            }) => Ok((v, *value_pos)),
            Some(e) => Err(e.key_pos.err(format!("`{key}` needs a value"))),
            None => Err(self.pos.err(format!("section is missing `{key}`"))),
        }
    }

    fn optional(&self, key: &str) -> Result<Option<(&'a str, Pos)>, ScenarioError> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.required(key).map(Some),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ScenarioError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !allowed.contains(&e.key) {
                return Err(e.key_pos.err(format!("unknown key `{}`", e.key)));
            }
            if !seen.insert(e.key) {
                return Err(e.key_pos.err(format!("duplicate key `{}`", e.key)));
            }
        }
        Ok(())
    }
}

fn number<T: std::str::FromStr>(text: &str, pos: Pos, what: &str) -> Result<T, ScenarioError> {
    text.trim()
        .parse()
        .map_err(|_| pos.err(format!("{what} must be a non-negative integer, found `{text}`")))
}

fn process(text: &str, pos: Pos, n: usize) -> Result<ProcessId, ScenarioError> {
    let id: u32 = number(text, pos, "process id")?;
    ProcessId::checked(id, n).map_err(|e| pos.err(e.to_string()))
}

fn list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn split_blocks(text: &str) -> Result<Vec<Block<'_>>, ScenarioError> {
    let mut blocks = vec![Block {
        kind: Section::Top,
        pos: Pos { line: 1, column: 1 },
        entries: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let indent = content.len() - content.trim_start().len();
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let pos = Pos {
            line,
            column: indent + 1,
        };
        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(pos.err("unterminated section header"));
            };
            let kind = match name.trim() {
                "op" => Section::Op,
                "adversary" => Section::Adversary,
                "expect" => Section::Expect,
                other => return Err(pos.err(format!("unknown section `[{other}]`"))),
            };
            blocks.push(Block {
                kind,
                pos,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value, value_col) = match trimmed.split_once('=') {
            Some((k, v)) => {
                let eq = content.find('=').expect("contains =");
                let lead = v.len() - v.trim_start().len();
                (k.trim(), Some(v.trim()), eq + 2 + lead)
            }
            None => (trimmed, None, indent + 1),
        };
        let block = blocks.last_mut().expect("top block");
        if value.is_none() && block.kind != Section::Expect {
            return Err(pos.err(format!("expected `key = value`, found `{trimmed}`")));
        }
        block.entries.push(Entry {
            key,
            value,
            key_pos: pos,
            value_pos: Pos {
                line,
                column: value_col,
            },
        });
    }
    Ok(blocks)
}

fn parse_call(text: &str, pos: Pos, object: Object, me: ProcessId, n: usize) -> Result<Call, ScenarioError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let arity = |k: usize| {
        if words.len() == k + 1 {
            Ok(())
        } else {
            Err(pos.err(format!("`{}` takes {k} argument(s)", words[0])))
        }
    };
    let Some(&name) = words.first() else {
        return Err(pos.err("empty call"));
    };
    let call = match (object, name) {
        (Object::Register, "write") => {
            arity(1)?;
            Call::Write(words[1].as_bytes().to_vec())
        }
        (Object::Register, "read") => {
            arity(1)?;
            Call::Read(process(words[1], pos, n)?)
        }
        (Object::Rbcast, "broadcast") => {
            arity(2)?;
            let ts: u64 = number(words[1], pos, "timestamp")?;
            if ts == 0 {
                return Err(pos.err("broadcast timestamps start at 1"));
            }
            Call::Broadcast {
                ts,
                val: words[2].as_bytes().to_vec(),
            }
        }
        (Object::Rbcast, "deliver") => {
            arity(2)?;
            Call::Deliver {
                from: process(words[1], pos, n)?,
                ts: number(words[2], pos, "timestamp")?,
            }
        }
        (Object::Snapshot, "update") => {
            arity(1)?;
            Call::Update(words[1].as_bytes().to_vec())
        }
        (Object::Snapshot, "snapshot") => {
            arity(0)?;
            Call::Snapshot
        }
        (Object::Transfer, "transfer") => {
            arity(2)?;
            let amount: u64 = number(words[2], pos, "amount")?;
            if amount == 0 {
                return Err(pos.err("transfer amount must be positive"));
            }
            Call::Transfer {
                src: me,
                dst: process(words[1], pos, n)?,
                amount,
            }
        }
        (Object::Transfer, "read") => {
            arity(1)?;
            Call::Read(process(words[1], pos, n)?)
        }
        _ => return Err(pos.err(format!("{} has no operation `{name}`", object.name()))),
    };
    Ok(call)
}

fn parse_strategy(block: &Block<'_>, object: Object, n: usize) -> Result<Strategy, ScenarioError> {
    let (name, pos) = block.required("strategy")?;
    let values = |key: &str| -> Result<Vec<Vec<u8>>, ScenarioError> {
        let (v, _) = block.required(key)?;
        Ok(list(v).map(|s| s.as_bytes().to_vec()).collect())
    };
    let needs = |o: Object| {
        if object == o {
            Ok(())
        } else {
            Err(pos.err(format!("strategy `{name}` needs object {}", o.name())))
        }
    };
    let strategy = match name {
        "crash-silent" => Strategy::CrashSilent,
        "register-reset" => Strategy::RegisterReset,
        "equivocate" => {
            needs(Object::Rbcast)?;
            let (s, spos) = block.required("stamps")?;
            let stamps = list(s)
                .map(|t| number(t, spos, "stamp"))
                .collect::<Result<Vec<u64>, _>>()?;
            let values = values("values")?;
            if stamps.is_empty() || values.is_empty() {
                return Err(pos.err("equivocate needs stamps and values"));
            }
            Strategy::Equivocate { stamps, values }
        }
        "twisted" => {
            needs(Object::Snapshot)?;
            let (_, vpos) = block.required("values")?;
            let vals = values("values")?;
            let [a, b]: [Vec<u8>; 2] = vals
                .try_into()
                .map_err(|_| vpos.err("twisted needs exactly two values"))?;
            Strategy::Twisted { values: [a, b] }
        }
        "overspend" => {
            needs(Object::Transfer)?;
            let (r, rpos) = block.required("records")?;
            let records = list(r)
                .map(|item| {
                    let parts: Vec<&str> = item.split(':').collect();
                    let [seq, dst, amount] = parts[..] else {
                        return Err(rpos.err(format!("record `{item}` is not seq:dst:amount")));
                    };
                    Ok((
                        number(seq, rpos, "seq")?,
                        process(dst, rpos, n)?,
                        number(amount, rpos, "amount")?,
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Strategy::Overspend { records }
        }
        "scribble" => {
            needs(Object::Register)?;
            Strategy::Scribble {
                values: values("values")?,
            }
        }
        other => return Err(pos.err(format!("unknown strategy `{other}`"))),
    };
    Ok(strategy)
}

fn parse_expect(e: &Entry<'_>) -> Result<Expectation, ScenarioError> {
    let arg = |what: &str| {
        e.value
            .ok_or_else(|| e.key_pos.err(format!("`{}` needs {what}", e.key)))
            .map(|v| (v, e.value_pos))
    };
    let plain = |x: Expectation| {
        if e.value.is_some() {
            Err(e.value_pos.err(format!("`{}` takes no value", e.key)))
        } else {
            Ok(x)
        }
    };
    match e.key {
        "all-complete" => plain(Expectation::AllComplete),
        "checker-pass" => plain(Expectation::CheckerPass),
        "invariants" => plain(Expectation::Invariants),
        "agreement" => plain(Expectation::Agreement),
        "snapshot-order" => plain(Expectation::SnapshotOrder),
        "snapshot-visibility" => plain(Expectation::SnapshotVisibility),
        "conservation" => plain(Expectation::Conservation),
        "never-completes" => Ok(Expectation::NeverCompletes(
            arg("an operation name")?.0.to_string(),
        )),
        "never-reads" => {
            let (v, pos) = arg("an amount")?;
            Ok(Expectation::NeverReads(number(v, pos, "amount")?))
        }
        "true-transfers" => {
            let (v, pos) = arg("a count")?;
            Ok(Expectation::TrueTransfers(number(v, pos, "count")?))
        }
        other => Err(e.key_pos.err(format!("unknown expectation `{other}`"))),
    }
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    parse_with_default(text, DEFAULT_MAX_STEPS)
}

/// Parses a scenario; `default_max_steps` applies when it sets no
/// `max_steps` of its own.
pub fn parse_with_default(text: &str, default_max_steps: u64) -> Result<Scenario, ScenarioError> {
    let blocks = split_blocks(text)?;
    let top = &blocks[0];
    top.check_keys(&[
        "name",
        "object",
        "n",
        "f",
        "seed",
        "max_steps",
        "window",
        "drain",
        "budget",
        "initial",
    ])?;
    let name = top.optional("name")?.map_or("unnamed", |(v, _)| v).to_string();
    let (obj, opos) = top.required("object")?;
    let object = match obj {
        "register" => Object::Register,
        "rbcast" => Object::Rbcast,
        "snapshot" => Object::Snapshot,
        "asset-transfer" => Object::Transfer,
        other => return Err(opos.err(format!("unknown object `{other}`"))),
    };
    let num = |key: &str, default: u64| -> Result<u64, ScenarioError> {
        match top.optional(key)? {
            Some((v, pos)) => number(v, pos, key),
            None => Ok(default),
        }
    };
    let (nv, npos) = top.required("n")?;
    let n: usize = number(nv, npos, "n")?;
    let f = num("f", 0)? as usize;
    let mut config =
        SystemConfig::new(n, f, num("seed", 0)?).with_max_steps(num("max_steps", default_max_steps)?);
    config.fairness_window = num("window", 4 * n as u64)?;
    config.validate().map_err(|e| npos.err(e.to_string()))?;
    let initial = match top.optional("initial")? {
        Some((v, pos)) => {
            let init = list(v)
                .map(|b| number(b, pos, "balance"))
                .collect::<Result<Vec<u64>, _>>()?;
            if init.len() != n {
                return Err(pos.err(format!("expected {n} initial balances, found {}", init.len())));
            }
            init
        }
        None => vec![0; n],
    };
    let mut scenario = Scenario {
        name,
        object,
        config,
        initial,
        drain: num("drain", 0)?,
        budget: num("budget", DEFAULT_BUDGET as u64)? as usize,
        ops: Vec::new(),
        adversaries: Vec::new(),
        expect: Vec::new(),
    };
    let mut stamps: BTreeSet<(ProcessId, u64)> = BTreeSet::new();
    let mut targets: BTreeSet<ProcessId> = BTreeSet::new();
    for block in &blocks[1..] {
        match block.kind {
            Section::Op => {
                block.check_keys(&["p", "call", "at", "after"])?;
                let (pv, ppos) = block.required("p")?;
                let p = process(pv, ppos, n)?;
                let (cv, cpos) = block.required("call")?;
                let call = parse_call(cv, cpos, object, p, n)?;
                if let Call::Broadcast { ts, .. } = call {
                    if !stamps.insert((p, ts)) {
                        return Err(cpos.err(format!("process {p} broadcasts timestamp {ts} twice")));
                    }
                }
                let at = match block.optional("at")? {
                    Some((v, pos)) => number(v, pos, "at")?,
                    None => 0,
                };
                let after = match block.optional("after")? {
                    Some((v, pos)) => {
                        let k: usize = number(v, pos, "after")?;
                        if k == 0 || k > scenario.ops.len() {
                            return Err(pos.err(format!(
                                "`after` must name an earlier op (1..{})",
                                scenario.ops.len()
                            )));
                        }
                        Some(k)
                    }
                    None => None,
                };
                scenario.ops.push(OpSpec {
                    process: p,
                    call,
                    at,
                    after,
                });
            }
            Section::Adversary => {
                block.check_keys(&["p", "strategy", "at", "stamps", "values", "records"])?;
                let (pv, ppos) = block.required("p")?;
                let p = process(pv, ppos, n)?;
                if targets.insert(p) && targets.len() > f {
                    return Err(ppos.err(format!("more than f={f} corrupted processes")));
                }
                let strategy = parse_strategy(block, object, n)?;
                let at = match block.optional("at")? {
                    Some((v, pos)) => number(v, pos, "at")?,
                    None => 0,
                };
                scenario.adversaries.push(AdversarySpec {
                    process: p,
                    strategy,
                    at,
                });
            }
            Section::Expect => {
                for e in &block.entries {
                    scenario.expect.push(parse_expect(e)?);
                }
            }
            Section::Top => unreachable!("only the first block is top-level"),
        }
    }
    Ok(scenario)
}
