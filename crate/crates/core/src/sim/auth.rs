//! Simulated public-key infrastructure.
//!
//! The harness is the only issuer of tags. A tag is an index into the
//! issuance log; verification looks the tag up and compares signer and
//! payload, so a tag moved onto another payload or claimed by another signer
//! fails.

use crate::sim::{ProcessId, SignedValue, SimError, Tag, Value};

#[derive(Debug, Clone)]
pub struct Issuance {
    pub signer: ProcessId,
    pub requester: ProcessId,
    pub step: u64,
    payload: Value,
}

#[derive(Debug, Default)]
pub struct Authority {
    issued: Vec<Issuance>,
}

impl Authority {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mints `⟨payload⟩_signer`. Only the signer itself may ask.
    pub fn sign(
        &mut self,
        requester: ProcessId,
        signer: ProcessId,
        payload: Value,
        step: u64,
    ) -> Result<SignedValue, SimError> {
        if requester != signer {
            return Err(SimError::Impersonation { requester, signer });
        }
        self.issued.push(Issuance {
            signer,
            requester,
            step,
            payload: payload.clone(),
        });
        let tag = Tag(self.issued.len() as u64);
        Ok(SignedValue::from_parts(signer, payload, tag))
    }

    pub fn verify(&self, sv: &SignedValue) -> bool {
        self.issuance(sv.tag())
            .is_some_and(|iss| iss.signer == sv.signer() && iss.payload == *sv.payload())
    }

    pub fn issuance(&self, tag: Tag) -> Option<&Issuance> {
        let idx = tag.raw().checked_sub(1)?;
        self.issued.get(usize::try_from(idx).ok()?)
    }

    pub fn issued_count(&self) -> usize {
        self.issued.len()
    }
}
