//! Elliptic-curve primitives: key generation, hash-then-sign signatures and
//! integrated public-key encryption, with an explicit operation counter.

mod curve;
mod ecdsa;
mod ecies;

use std::fmt;
use std::ops::AddAssign;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use thiserror::Error;

pub use curve::{to_fixed_be, CurveId, CurveParams, EcPoint};
pub use ecdsa::{sign, verify, Signature};
pub use ecies::{decrypt, encrypt, Ciphertext, EncryptOptions, MAC_LEN, PLAINTEXT_BUDGET};

/// SHA-1 digest length.
pub const HASH_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(String),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("plaintext of {len} bytes exceeds the {max}-byte budget")]
    BudgetExceeded { len: usize, max: usize },
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("decode error: {0}")]
    Decode(String),
    #[error("message must not be empty")]
    EmptyMessage,
}

/// Tally of primitive operations performed within one measurement scope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounter {
    pub sm: u64,
    pub pa: u64,
    pub hash: u64,
    pub mac: u64,
    pub enc: u64,
    pub dec: u64,
    pub kdf: u64,
}

impl OpCounter {
    pub fn new() -> OpCounter {
        OpCounter::default()
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        self.sm += rhs.sm;
        self.pa += rhs.pa;
        self.hash += rhs.hash;
        self.mac += rhs.mac;
        self.enc += rhs.enc;
        self.dec += rhs.dec;
        self.kdf += rhs.kdf;
    }
}

/// Private scalar in `[1, n-1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey(BigUint);

impl PrivateKey {
    pub fn from_scalar(curve: &CurveParams, d: BigUint) -> Result<PrivateKey, CryptoError> {
        if d == BigUint::from(0u32) || d >= curve.n {
            return Err(CryptoError::InvalidInput("private scalar out of range"));
        }
        Ok(PrivateKey(d))
    }

    pub fn scalar(&self) -> &BigUint {
        &self.0
    }

    /// Fixed-width big-endian encoding (`scalar_len` bytes).
    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        to_fixed_be(&self.0, curve.scalar_len())
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub private: PrivateKey,
    pub public: EcPoint,
}

impl KeyPair {
    pub fn from_private(curve: &CurveParams, private: PrivateKey) -> KeyPair {
        let public = curve.mul(private.scalar(), &curve.g);
        KeyPair { private, public }
    }
}

/// Draws a key pair deterministically from `seed`.
pub fn keygen(curve: &CurveParams, seed: u64) -> KeyPair {
    let d = derive_scalar(curve, b"keygen", &seed.to_be_bytes());
    KeyPair::from_private(curve, PrivateKey(d))
}

pub fn sha1(data: &[u8]) -> [u8; HASH_LEN] {
    Sha1::digest(data).into()
}

/// ANSI X9.63 key derivation with SHA-1: `H(z || counter || info)` blocks.
pub fn kdf_x963(z: &[u8], info: &[u8], out_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(out_len + HASH_LEN);
    let mut counter = 1u32;
    while out.len() < out_len {
        let mut h = Sha1::new();
        h.update(z);
        h.update(counter.to_be_bytes());
        h.update(info);
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(out_len);
    out
}

/// Uniform-ish scalar in `[1, n-1]` from labelled seed material. Draws 8
/// extra bytes before reduction to keep the bias negligible.
pub(crate) fn derive_scalar(curve: &CurveParams, label: &[u8], material: &[u8]) -> BigUint {
    let bytes = kdf_x963(material, label, curve.scalar_len() + 8);
    let nm1 = &curve.n - 1u32;
    BigUint::from_bytes_be(&bytes) % nm1 + 1u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keygen_is_deterministic_and_on_curve() {
        let c = CurveId::Secp160r1.params();
        let a = keygen(c, 42);
        let b = keygen(c, 42);
        assert_eq!(a, b);
        assert!(c.is_on_curve(&a.public));
        assert_ne!(keygen(c, 43).public, a.public);
    }

    #[test]
    fn unit_scalar_gives_base_point() {
        let c = CurveId::Secp160r1.params();
        let kp = KeyPair::from_private(c, PrivateKey::from_scalar(c, BigUint::from(1u32)).unwrap());
        assert_eq!(kp.public, c.g);
        let kp2 = KeyPair::from_private(c, PrivateKey::from_scalar(c, BigUint::from(2u32)).unwrap());
        assert_eq!(kp2.public, c.double(&c.g));
    }

    #[test]
    fn private_scalar_range_is_enforced() {
        let c = CurveId::Toy16.params();
        assert!(PrivateKey::from_scalar(c, BigUint::from(0u32)).is_err());
        assert!(PrivateKey::from_scalar(c, c.n.clone()).is_err());
        assert!(PrivateKey::from_scalar(c, &c.n - 1u32).is_ok());
    }

    #[test]
    fn kdf_first_block_is_plain_hash() {
        let out = kdf_x963(b"z", b"", 20);
        let mut input = b"z".to_vec();
        input.extend(1u32.to_be_bytes());
        assert_eq!(out, sha1(&input).to_vec());
        assert_eq!(kdf_x963(b"z", b"", 36).len(), 36);
    }

    #[test]
    fn private_key_debug_is_redacted() {
        let kp = keygen(CurveId::Toy16.params(), 1);
        assert_eq!(format!("{:?}", kp.private), "PrivateKey(..)");
    }
}
