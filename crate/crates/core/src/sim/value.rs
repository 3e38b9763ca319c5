//! Register contents and register labels.

use std::fmt;
use std::rc::Rc;

use crate::codec::{digest64, Decode, DecodeError, Decoder, Encode, Encoder};
use crate::sim::ProcessId;

/// Authenticity token issued by the harness's signing authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub(crate) u64);

impl Tag {
    pub fn raw(self) -> u64 {
        self.0
    }

    /// A tag that was never issued. Useful for modelling forgery attempts.
    pub fn bogus(raw: u64) -> Self {
        Tag(raw)
    }
}

#[derive(Debug)]
struct SignedInner {
    signer: ProcessId,
    payload: Value,
    tag: Tag,
}

/// `⟨payload⟩_signer`. Cheap to clone.
///
/// Anyone may assemble a `SignedValue` from parts, but only values minted by
/// [`crate::sim::Authority::sign`] pass verification.
#[derive(Debug, Clone)]
pub struct SignedValue(Rc<SignedInner>);

impl SignedValue {
    pub fn from_parts(signer: ProcessId, payload: Value, tag: Tag) -> Self {
        SignedValue(Rc::new(SignedInner { signer, payload, tag }))
    }

    pub fn signer(&self) -> ProcessId {
        self.0.signer
    }

    pub fn payload(&self) -> &Value {
        &self.0.payload
    }

    pub fn tag(&self) -> Tag {
        self.0.tag
    }

    pub fn ptr_eq(&self, other: &SignedValue) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl PartialEq for SignedValue {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other)
            || (self.0.signer == other.0.signer
                && self.0.tag == other.0.tag
                && self.0.payload == other.0.payload)
    }
}

impl Eq for SignedValue {}

/// A register value. Registers hold whole values; every read or write moves
/// one complete `Value` atomically.
#[derive(Debug, Clone, Default)]
pub enum Value {
    /// Initial content of every register.
    #[default]
    Bottom,
    Int(u64),
    Bytes(Rc<[u8]>),
    Signed(SignedValue),
    List(Rc<[Value]>),
}

impl Value {
    pub fn bytes(b: impl AsRef<[u8]>) -> Self {
        Value::Bytes(Rc::from(b.as_ref()))
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Self {
        Value::List(items.into_iter().collect::<Vec<_>>().into())
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    pub fn as_int(&self) -> Option<u64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_signed(&self) -> Option<&SignedValue> {
        match self {
            Value::Signed(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    /// Digest of the canonical encoding, as shown in traces.
    pub fn digest(&self) -> u64 {
        digest64(&self.to_bytes())
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bottom, Value::Bottom) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bytes(a), Value::Bytes(b)) => Rc::ptr_eq(a, b) || a == b,
            (Value::Signed(a), Value::Signed(b)) => a == b,
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

const TAG_BOTTOM: u8 = 0;
const TAG_INT: u8 = 1;
const TAG_BYTES: u8 = 2;
const TAG_SIGNED: u8 = 3;
const TAG_LIST: u8 = 4;

impl Encode for Value {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Value::Bottom => enc.put_u8(TAG_BOTTOM),
            Value::Int(v) => {
                enc.put_u8(TAG_INT);
                enc.put_u64(*v);
            }
            Value::Bytes(b) => {
                enc.put_u8(TAG_BYTES);
                enc.put_bytes(b);
            }
            Value::Signed(s) => {
                enc.put_u8(TAG_SIGNED);
                s.encode(enc);
            }
            Value::List(items) => {
                enc.put_u8(TAG_LIST);
                enc.put_len(items.len());
                for item in items.iter() {
                    item.encode(enc);
                }
            }
        }
    }
}

impl Decode for Value {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8()? {
            TAG_BOTTOM => Ok(Value::Bottom),
            TAG_INT => Ok(Value::Int(dec.get_u64()?)),
            TAG_BYTES => Ok(Value::bytes(dec.get_bytes()?)),
            TAG_SIGNED => Ok(Value::Signed(SignedValue::decode(dec)?)),
            TAG_LIST => {
                let len = dec.get_len()?;
                let items = (0..len)
                    .map(|_| Value::decode(dec))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Value::List(items.into()))
            }
            t => Err(dec.bad_tag(t)),
        }
    }
}

impl Encode for SignedValue {
    fn encode(&self, enc: &mut Encoder) {
        self.signer().encode(enc);
        self.payload().encode(enc);
        enc.put_u64(self.tag().0);
    }
}

impl Decode for SignedValue {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let signer = ProcessId::decode(dec)?;
        let payload = Value::decode(dec)?;
        let tag = Tag(dec.get_u64()?);
        Ok(SignedValue::from_parts(signer, payload, tag))
    }
}

/// Namespace of one reliable-broadcast instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instance {
    Named(Rc<str>),
    /// The instance a snapshot-aux invocation with this auxnum runs.
    SnapAux(u64),
}

impl Instance {
    pub fn named(name: &str) -> Self {
        Instance::Named(Rc::from(name))
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instance::Named(name) => f.write_str(name),
            Instance::SnapAux(k) => write!(f, "snapaux/{k}"),
        }
    }
}

impl Encode for Instance {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Instance::Named(name) => {
                enc.put_u8(0);
                enc.put_bytes(name.as_bytes());
            }
            Instance::SnapAux(k) => {
                enc.put_u8(1);
                enc.put_u64(*k);
            }
        }
    }
}

impl Decode for Instance {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8()? {
            0 => {
                let raw = dec.get_bytes()?;
                let name = std::str::from_utf8(raw).map_err(|_| DecodeError::Invalid("instance name"))?;
                Ok(Instance::named(name))
            }
            1 => Ok(Instance::SnapAux(dec.get_u64()?)),
            t => Err(dec.bad_tag(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RbVar {
    Send,
    Echo,
    Ready,
    Deliver,
}

impl RbVar {
    pub const ALL: [RbVar; 4] = [RbVar::Send, RbVar::Echo, RbVar::Ready, RbVar::Deliver];

    fn name(self) -> &'static str {
        match self {
            RbVar::Send => "send",
            RbVar::Echo => "echo",
            RbVar::Ready => "ready",
            RbVar::Deliver => "deliver",
        }
    }
}

/// Register name within an owner's register family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Rb { instance: Instance, var: RbVar },
    Collected,
    SaveSnap(u64),
    Named(Rc<str>),
}

impl Label {
    pub fn rb(instance: &Instance, var: RbVar) -> Self {
        Label::Rb {
            instance: instance.clone(),
            var,
        }
    }

    pub fn named(name: &str) -> Self {
        Label::Named(Rc::from(name))
    }

    /// Renders the label as it appears in traces for a register of `owner`.
    pub fn render(&self, owner: ProcessId) -> String {
        match self {
            Label::Rb { instance, var } => format!("rbcast/{instance}/{}_{owner}", var.name()),
            Label::Collected => format!("snap/collected_{owner}"),
            Label::SaveSnap(k) => format!("snap/savesnap_{owner}/{k}"),
            Label::Named(name) => name.to_string(),
        }
    }

    /// Parses a rendered label back. Unknown shapes become `Named`.
    pub fn parse(rendered: &str) -> Label {
        fn owner_suffix(s: &str) -> Option<(&str, &str)> {
            s.rsplit_once('_')
        }
        if let Some(rest) = rendered.strip_prefix("rbcast/") {
            if let Some((inst, var_owner)) = rest.rsplit_once('/') {
                if let Some((var, _)) = owner_suffix(var_owner) {
                    let var = match var {
                        "send" => Some(RbVar::Send),
                        "echo" => Some(RbVar::Echo),
                        "ready" => Some(RbVar::Ready),
                        "deliver" => Some(RbVar::Deliver),
                        _ => None,
                    };
                    if let Some(var) = var {
                        let instance = match inst.strip_prefix("snapaux/") {
                            Some(k) => match k.parse() {
                                Ok(k) => Instance::SnapAux(k),
                                Err(_) => Instance::named(inst),
                            },
                            None => Instance::named(inst),
                        };
                        return Label::Rb { instance, var };
                    }
                }
            }
        }
        if let Some(rest) = rendered.strip_prefix("snap/") {
            if rest.starts_with("collected_") {
                return Label::Collected;
            }
            if let Some(rest) = rest.strip_prefix("savesnap_") {
                if let Some((_, k)) = rest.split_once('/') {
                    if let Ok(k) = k.parse() {
                        return Label::SaveSnap(k);
                    }
                }
            }
        }
        Label::named(rendered)
    }
}
