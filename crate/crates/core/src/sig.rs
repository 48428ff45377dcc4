//! Deterministic signing stand-in for node broadcasts.
//!
//! The simulator needs signatures only as a boolean validity gate, so this is
//! an integrity stamp rather than an unforgeable scheme: a signature is
//! `signer_id || SHA-256(signer_id || message)`, self-contained and checkable
//! by anyone. Real-key infrastructure is explicitly out of scope.

use sha2::{Digest, Sha256};

pub const SIGNER_ID_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// Per-user signing identity derived from a seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningKey {
    id: [u8; SIGNER_ID_LEN],
}

impl SigningKey {
    pub fn from_seed(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"fedforget-signer");
        hasher.update(seed.to_le_bytes());
        Self {
            id: hasher.finalize().into(),
        }
    }

    pub fn signer_id(&self) -> &[u8; SIGNER_ID_LEN] {
        &self.id
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        let mut sig = Vec::with_capacity(SIGNATURE_LEN);
        sig.extend_from_slice(&self.id);
        sig.extend_from_slice(&stamp(&self.id, message));
        sig
    }
}

fn stamp(id: &[u8; SIGNER_ID_LEN], message: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(id);
    hasher.update(message);
    hasher.finalize().into()
}

/// Checks a signature produced by [`SigningKey::sign`].
pub fn verify(message: &[u8], signature: &[u8]) -> bool {
    if signature.len() != SIGNATURE_LEN {
        return false;
    }
    let id: [u8; SIGNER_ID_LEN] = signature[..SIGNER_ID_LEN]
        .try_into()
        .expect("length checked");
    signature[SIGNER_ID_LEN..] == stamp(&id, message)
}
