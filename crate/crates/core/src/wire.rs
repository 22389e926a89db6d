//! Byte-exact codecs for the two handshake messages and the simulated link
//! frame that carries them.
//!
//! ```text
//! New1 body:  [round:4][nonce:4][certificate]
//! New2 body:  [ciphertext][signature]
//! link frame: [src:2][dst:2][type:1][len:1][body][fcs:2][pad:5]
//! ```
//!
//! The message type lives in the frame header, not in the body. The nonce
//! covered by a New2 signature is never transmitted; the verifier supplies
//! its own.

use crc::{Crc, CRC_16_KERMIT};
use thiserror::Error;

use crate::cert::{CertError, Certificate, NodeId};
use crate::crypto::{Ciphertext, CryptoError, CurveParams, Signature};

/// IEEE 802.15.4 `aMaxPHYPacketSize`.
pub const MAX_FRAME: usize = 127;
/// Link header plus trailer.
pub const ATTACHMENT: usize = 13;
/// Largest message body that fits a single frame.
pub const MAX_PAYLOAD: usize = 114;
pub const NONCE_LEN: usize = 4;
pub const ROUND_LEN: usize = 4;

const HEADER_LEN: usize = 6;
const FCS_LEN: usize = 2;
const PAD_LEN: usize = ATTACHMENT - HEADER_LEN - FCS_LEN;
const FCS: Crc<u16> = Crc::<u16>::new(&CRC_16_KERMIT);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameBudget {
    pub max_frame: usize,
    pub attachment: usize,
    pub max_payload: usize,
}

impl Default for FrameBudget {
    fn default() -> Self {
        FrameBudget {
            max_frame: MAX_FRAME,
            attachment: ATTACHMENT,
            max_payload: MAX_PAYLOAD,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed {what}: expected {expected} bytes, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("body of {0} bytes exceeds the {MAX_PAYLOAD}-byte payload budget")]
    BudgetExceeded(usize),
    #[error("frame check sequence mismatch")]
    BadFcs,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nonce(pub [u8; NONCE_LEN]);

/// True iff `body` fits in one frame.
pub fn check_budget(body: &[u8]) -> bool {
    body.len() <= MAX_PAYLOAD
}

/// Sizes of the handshake messages for one curve and serialization mode.
#[derive(Clone, Copy, Debug)]
pub struct WireLayout {
    pub curve: &'static CurveParams,
    pub compressed: bool,
    pub secret_len: usize,
}

impl WireLayout {
    pub fn new(curve: &'static CurveParams, compressed: bool, secret_len: usize) -> WireLayout {
        WireLayout {
            curve,
            compressed,
            secret_len,
        }
    }

    pub fn cert_len(&self) -> usize {
        Certificate::encoded_len(self.curve, self.compressed)
    }

    pub fn new1_len(&self) -> usize {
        ROUND_LEN + NONCE_LEN + self.cert_len()
    }

    pub fn cipher_len(&self) -> usize {
        Ciphertext::encoded_len(self.curve, self.compressed, self.secret_len)
    }

    pub fn new2_len(&self) -> usize {
        self.cipher_len() + Signature::encoded_len(self.curve)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct New1Packet {
    pub round: u32,
    pub nonce: Nonce,
    pub cert: Certificate,
}

impl New1Packet {
    pub fn encode(&self, layout: &WireLayout) -> Result<Vec<u8>, WireError> {
        let mut out = self.round.to_be_bytes().to_vec();
        out.extend_from_slice(&self.nonce.0);
        out.extend(self.cert.to_bytes(layout.curve));
        if out.len() != layout.new1_len() {
            return Err(WireError::Length {
                what: "New1 body",
                expected: layout.new1_len(),
                got: out.len(),
            });
        }
        if !check_budget(&out) {
            return Err(WireError::BudgetExceeded(out.len()));
        }
        Ok(out)
    }

    /// Length is checked before anything else is parsed.
    pub fn decode(bytes: &[u8], layout: &WireLayout) -> Result<New1Packet, WireError> {
        if bytes.len() != layout.new1_len() {
            return Err(WireError::Length {
                what: "New1 body",
                expected: layout.new1_len(),
                got: bytes.len(),
            });
        }
        let round = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        let nonce = Nonce(bytes[4..8].try_into().expect("4 bytes"));
        let cert = Certificate::from_bytes(layout.curve, &bytes[8..], layout.compressed)?;
        Ok(New1Packet { round, nonce, cert })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct New2Packet {
    /// Serialized ciphertext; the signature covers these exact bytes.
    pub cipher: Vec<u8>,
    pub sig: Signature,
}

impl New2Packet {
    /// The byte string the sender signs: `cipher || challenger nonce`.
    pub fn signed_bytes(cipher: &[u8], nonce: &Nonce) -> Vec<u8> {
        let mut out = cipher.to_vec();
        out.extend_from_slice(&nonce.0);
        out
    }

    pub fn encode(&self, layout: &WireLayout) -> Result<Vec<u8>, WireError> {
        if self.cipher.len() != layout.cipher_len() {
            return Err(WireError::Length {
                what: "New2 ciphertext",
                expected: layout.cipher_len(),
                got: self.cipher.len(),
            });
        }
        let mut out = self.cipher.clone();
        out.extend(self.sig.to_bytes(layout.curve));
        if !check_budget(&out) {
            return Err(WireError::BudgetExceeded(out.len()));
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], layout: &WireLayout) -> Result<New2Packet, WireError> {
        if bytes.len() != layout.new2_len() {
            return Err(WireError::Length {
                what: "New2 body",
                expected: layout.new2_len(),
                got: bytes.len(),
            });
        }
        let split = layout.cipher_len();
        Ok(New2Packet {
            cipher: bytes[..split].to_vec(),
            sig: Signature::from_bytes(layout.curve, &bytes[split..])?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    New1,
    New2,
}

impl MessageKind {
    fn code(self) -> u8 {
        match self {
            MessageKind::New1 => 0x01,
            MessageKind::New2 => 0x02,
        }
    }

    fn from_code(code: u8) -> Result<MessageKind, WireError> {
        match code {
            0x01 => Ok(MessageKind::New1),
            0x02 => Ok(MessageKind::New2),
            other => Err(WireError::UnknownType(other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkFrame {
    pub src: NodeId,
    /// [`NodeId::BROADCAST`] for broadcasts.
    pub dst: NodeId,
    pub kind: MessageKind,
    pub body: Vec<u8>,
}

impl LinkFrame {
    pub fn is_broadcast(&self) -> bool {
        self.dst == NodeId::BROADCAST
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if !check_budget(&self.body) {
            return Err(WireError::BudgetExceeded(self.body.len()));
        }
        let mut out = Vec::with_capacity(self.body.len() + ATTACHMENT);
        out.extend(self.src.to_bytes());
        out.extend(self.dst.to_bytes());
        out.push(self.kind.code());
        out.push(self.body.len() as u8);
        out.extend_from_slice(&self.body);
        let fcs = FCS.checksum(&out);
        out.extend(fcs.to_le_bytes());
        out.extend([0u8; PAD_LEN]);
        debug_assert!(out.len() <= MAX_FRAME);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<LinkFrame, WireError> {
        if bytes.len() < ATTACHMENT {
            return Err(WireError::Length {
                what: "link frame",
                expected: ATTACHMENT,
                got: bytes.len(),
            });
        }
        let body_len = bytes[5] as usize;
        if bytes.len() != ATTACHMENT + body_len {
            return Err(WireError::Length {
                what: "link frame",
                expected: ATTACHMENT + body_len,
                got: bytes.len(),
            });
        }
        if body_len > MAX_PAYLOAD {
            return Err(WireError::BudgetExceeded(body_len));
        }
        let fcs_at = HEADER_LEN + body_len;
        let fcs = u16::from_le_bytes([bytes[fcs_at], bytes[fcs_at + 1]]);
        if FCS.checksum(&bytes[..fcs_at]) != fcs {
            return Err(WireError::BadFcs);
        }
        Ok(LinkFrame {
            src: NodeId(u16::from_be_bytes([bytes[0], bytes[1]])),
            dst: NodeId(u16::from_be_bytes([bytes[2], bytes[3]])),
            kind: MessageKind::from_code(bytes[4])?,
            body: bytes[HEADER_LEN..fcs_at].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::issue;
    use crate::crypto::{encrypt, keygen, sign, CurveId, EncryptOptions, OpCounter};

    fn layout(compressed: bool) -> WireLayout {
        WireLayout::new(CurveId::Secp160r1.params(), compressed, 10)
    }

    fn sample_new1() -> New1Packet {
        let c = CurveId::Secp160r1.params();
        let kgc = keygen(c, 1);
        let node = keygen(c, 2);
        New1Packet {
            round: 7,
            nonce: Nonce([1, 2, 3, 4]),
            cert: issue(c, NodeId(1), &node.public, &kgc.private, false).unwrap(),
        }
    }

    fn sample_new2(compressed: bool) -> New2Packet {
        let c = CurveId::Secp160r1.params();
        let a = keygen(c, 3);
        let b = keygen(c, 4);
        let opts = EncryptOptions {
            compressed,
            ..Default::default()
        };
        let ct = encrypt(c, &b.public, &[9u8; 10], opts, 1, &mut OpCounter::new()).unwrap();
        let cipher = ct.to_bytes(c);
        let sig = sign(
            c,
            &a.private,
            &New2Packet::signed_bytes(&cipher, &Nonce([5; 4])),
            0,
            &mut OpCounter::new(),
        )
        .unwrap();
        New2Packet { cipher, sig }
    }

    #[test]
    fn new1_is_90_bytes_and_roundtrips() {
        let l = layout(false);
        let p = sample_new1();
        let body = p.encode(&l).unwrap();
        assert_eq!(body.len(), 90);
        assert!(check_budget(&body));
        assert_eq!(New1Packet::decode(&body, &l).unwrap(), p);
    }

    #[test]
    fn truncated_new1_is_malformed() {
        let l = layout(false);
        let body = sample_new1().encode(&l).unwrap();
        assert!(matches!(
            New1Packet::decode(&body[..89], &l),
            Err(WireError::Length { .. })
        ));
    }

    #[test]
    fn new2_is_110_bytes_and_roundtrips() {
        let l = layout(false);
        let p = sample_new2(false);
        let body = p.encode(&l).unwrap();
        assert_eq!(body.len(), 110);
        assert!(check_budget(&body));
        assert_eq!(New2Packet::decode(&body, &l).unwrap(), p);
    }

    #[test]
    fn compressed_new2_is_91_bytes() {
        let l = layout(true);
        let body = sample_new2(true).encode(&l).unwrap();
        assert_eq!(body.len(), 91);
        assert_eq!(l.new2_len(), 91);
    }

    #[test]
    fn new2_component_length_checked() {
        let l = layout(false);
        let mut p = sample_new2(false);
        p.cipher.pop();
        assert!(matches!(p.encode(&l), Err(WireError::Length { .. })));
    }

    #[test]
    fn budget_boundary() {
        assert!(check_budget(&[0u8; 114]));
        assert!(!check_budget(&[0u8; 115]));
    }

    #[test]
    fn frame_attachment_is_13_bytes() {
        let body = sample_new1().encode(&layout(false)).unwrap();
        let frame = LinkFrame {
            src: NodeId(1),
            dst: NodeId::BROADCAST,
            kind: MessageKind::New1,
            body,
        };
        let bytes = frame.encode().unwrap();
        assert_eq!(bytes.len(), 103);
        assert!(bytes.len() <= MAX_FRAME);
        assert_eq!(LinkFrame::decode(&bytes).unwrap(), frame);
    }

    #[test]
    fn corrupted_frame_fails_fcs() {
        let frame = LinkFrame {
            src: NodeId(1),
            dst: NodeId(2),
            kind: MessageKind::New2,
            body: vec![1, 2, 3],
        };
        let mut bytes = frame.encode().unwrap();
        bytes[7] ^= 1;
        assert_eq!(LinkFrame::decode(&bytes), Err(WireError::BadFcs));
        let oversize = LinkFrame {
            body: vec![0; 115],
            ..frame
        };
        assert_eq!(oversize.encode(), Err(WireError::BudgetExceeded(115)));
    }
}
