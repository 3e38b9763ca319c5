//! Canonical byte encoding.
//!
//! Every domain type that is signed, digested or written to a history file
//! has exactly one byte representation:
//!
//! * unsigned integers are 8 bytes, big-endian;
//! * byte strings are a `u64` length followed by the raw bytes;
//! * sequences are a `u64` element count followed by the elements in order;
//! * `Option<T>` is `0x00` for `None`, `0x01` followed by `T` otherwise;
//! * enums are a one-byte discriminant followed by the variant's fields in
//!   declaration order.
//!
//! Decoding is strict: trailing bytes, truncated input and unknown
//! discriminants are all errors.

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("unknown discriminant {tag} at offset {offset}")]
    BadTag { tag: u8, offset: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid value: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    pub fn put_len(&mut self, len: usize) {
        self.put_u64(len as u64);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.buf.len())
            .ok_or(DecodeError::Truncated(self.pos))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u64(&mut self) -> Result<u64, DecodeError> {
        let raw = self.take(8)?;
        let mut be = [0u8; 8];
        be.copy_from_slice(raw);
        Ok(u64::from_be_bytes(be))
    }

    pub fn get_len(&mut self) -> Result<usize, DecodeError> {
        let len = self.get_u64()?;
        // A length can never exceed what is left in the buffer (every element
        // occupies at least one byte), which also rejects absurd allocations.
        if len > (self.buf.len() - self.pos) as u64 {
            return Err(DecodeError::Truncated(self.pos));
        }
        Ok(len as usize)
    }

    pub fn get_bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.get_len()?;
        self.take(len)
    }

    pub fn bad_tag(&self, tag: u8) -> DecodeError {
        DecodeError::BadTag {
            tag,
            offset: self.pos.saturating_sub(1),
        }
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

pub trait Encode {
    fn encode(&self, enc: &mut Encoder);

    fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.finish()
    }
}

pub trait Decode: Sized {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError>;

    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let out = Self::decode(&mut dec)?;
        dec.finish()?;
        Ok(out)
    }
}

impl Encode for u64 {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(*self);
    }
}

impl Decode for u64 {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.get_u64()
    }
}

impl Encode for bool {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u8(u8::from(*self));
    }
}

impl Decode for bool {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8()? {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(dec.bad_tag(t)),
        }
    }
}

impl Encode for Vec<u8> {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_bytes(self);
    }
}

impl Decode for Vec<u8> {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(dec.get_bytes()?.to_vec())
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            None => enc.put_u8(0),
            Some(v) => {
                enc.put_u8(1);
                v.encode(enc);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode(dec)?)),
            t => Err(dec.bad_tag(t)),
        }
    }
}

impl<A: Encode, B: Encode> Encode for (A, B) {
    fn encode(&self, enc: &mut Encoder) {
        self.0.encode(enc);
        self.1.encode(enc);
    }
}

impl<A: Decode, B: Decode> Decode for (A, B) {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok((A::decode(dec)?, B::decode(dec)?))
    }
}

/// Encodes a slice of encodable items as a counted sequence.
pub fn encode_seq<T: Encode>(items: &[T], enc: &mut Encoder) {
    enc.put_len(items.len());
    for item in items {
        item.encode(enc);
    }
}

pub fn decode_seq<T: Decode>(dec: &mut Decoder<'_>) -> Result<Vec<T>, DecodeError> {
    let len = dec.get_len()?;
    (0..len).map(|_| T::decode(dec)).collect()
}

/// Stable 64-bit digest: the first eight bytes of SHA-256, big-endian.
pub fn digest64(bytes: &[u8]) -> u64 {
    let out = Sha256::digest(bytes);
    let mut first = [0u8; 8];
    first.copy_from_slice(&out[..8]);
    u64::from_be_bytes(first)
}
