use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cert::NodeId;
use crate::crypto::EcPoint;
use crate::wire::Nonce;

pub const SECRET_LEN: usize = 10;

/// 80-bit value a node picks for one partner in one stage.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretValue(pub [u8; SECRET_LEN]);

/// `own secret XOR partner secret`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairwiseKey(pub [u8; SECRET_LEN]);

impl PairwiseKey {
    pub fn combine(own: &SecretValue, partner: &SecretValue) -> PairwiseKey {
        let mut out = [0u8; SECRET_LEN];
        for (o, (a, b)) in out.iter_mut().zip(own.0.iter().zip(partner.0.iter())) {
            *o = a ^ b;
        }
        PairwiseKey(out)
    }
}

impl fmt::Debug for SecretValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretValue(..)")
    }
}

impl fmt::Debug for PairwiseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PairwiseKey(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborState {
    Registered,
    Established,
}

/// Per-partner handshake state.
#[derive(Clone, Debug)]
pub struct NeighborEntry {
    pub partner: NodeId,
    pub public: EcPoint,
    pub cert_bytes: Vec<u8>,
    pub partner_nonce: Nonce,
    pub partner_round: u32,
    pub own_secret: SecretValue,
    pub partner_secret: Option<SecretValue>,
    pub state: NeighborState,
    pub registered_at: u64,
    pub last_new2_at: u64,
    pub new2_resends: u32,
    /// Our ciphertext for this partner; fixed for the stage.
    pub new2_cipher: Vec<u8>,
    /// Encoded link frame of our New2 to this partner.
    pub new2_frame: Vec<u8>,
    /// Body of the partner's New2 that established the key.
    pub accepted_new2: Option<Vec<u8>>,
}

impl NeighborEntry {
    pub fn pairwise_key(&self) -> Option<PairwiseKey> {
        match (self.state, &self.partner_secret) {
            (NeighborState::Established, Some(partner)) => Some(PairwiseKey::combine(&self.own_secret, partner)),
            _ => None,
        }
    }
}
