//! Lightweight certificates: `(id, Q, Sign_KGC(id || Q))`.
//!
//! Byte layout: `[id:2][Q:2L or L+1][r:L][s:L]`, big-endian. There is no
//! validity period, serial or extension field.

use std::fmt;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, CryptoError, CurveParams, EcPoint, OpCounter, PrivateKey, Signature};

/// Two-byte node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const BROADCAST: NodeId = NodeId(0xFFFF);

    pub fn to_bytes(self) -> [u8; 2] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertError {
    #[error("certificate must be {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// A certificate. The public key is held in its serialized form, so a
/// certificate carrying an undecodable point can still be parsed and then
/// rejected by [`verify_cert`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Certificate {
    pub id: NodeId,
    pub key_bytes: Vec<u8>,
    pub sig: Signature,
    pub compressed: bool,
}

impl Certificate {
    pub fn encoded_len(curve: &CurveParams, compressed: bool) -> usize {
        2 + curve.point_len(compressed) + Signature::encoded_len(curve)
    }

    /// The bytes covered by the KGC signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        signed_bytes(self.id, &self.key_bytes)
    }

    pub fn public_key(&self, curve: &CurveParams) -> Result<EcPoint, CryptoError> {
        curve.decode_point_mode(&self.key_bytes, self.compressed)
    }

    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = self.signed_bytes();
        out.extend(self.sig.to_bytes(curve));
        out
    }

    pub fn from_bytes(curve: &CurveParams, bytes: &[u8], compressed: bool) -> Result<Certificate, CertError> {
        let expected = Certificate::encoded_len(curve, compressed);
        if bytes.len() != expected {
            return Err(CertError::Length {
                expected,
                got: bytes.len(),
            });
        }
        let key_end = 2 + curve.point_len(compressed);
        Ok(Certificate {
            id: NodeId(u16::from_be_bytes([bytes[0], bytes[1]])),
            key_bytes: bytes[2..key_end].to_vec(),
            sig: Signature::from_bytes(curve, &bytes[key_end..])?,
            compressed,
        })
    }
}

fn signed_bytes(id: NodeId, key_bytes: &[u8]) -> Vec<u8> {
    let mut out = id.to_bytes().to_vec();
    out.extend_from_slice(key_bytes);
    out
}

/// Issues a certificate binding `id` to `public` under the KGC key.
pub fn issue(
    curve: &CurveParams,
    id: NodeId,
    public: &EcPoint,
    kgc_key: &PrivateKey,
    compressed: bool,
) -> Result<Certificate, CertError> {
    if public.is_infinity() || !curve.is_on_curve(public) {
        return Err(CryptoError::InvalidInput("certified key not on curve").into());
    }
    let key_bytes = curve.encode_point_mode(public, compressed)?;
    let sig = crypto::sign(
        curve,
        kgc_key,
        &signed_bytes(id, &key_bytes),
        u64::from(id.0),
        &mut OpCounter::new(),
    )?;
    Ok(Certificate {
        id,
        key_bytes,
        sig,
        compressed,
    })
}

/// True iff the KGC signature verifies and the embedded key decodes to an
/// on-curve point.
pub fn verify_cert(curve: &CurveParams, cert: &Certificate, kgc_public: &EcPoint, ops: &mut OpCounter) -> bool {
    if let Err(e) = cert.public_key(curve) {
        debug!("certificate {}: embedded key rejected: {e}", cert.id);
        return false;
    }
    match crypto::verify(curve, kgc_public, &cert.signed_bytes(), &cert.sig, ops) {
        Ok(ok) => ok,
        Err(e) => {
            debug!("certificate {}: KGC key rejected: {e}", cert.id);
            false
        }
    }
}
