use aes::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use sha1::Sha1;

use super::{curve::to_fixed_be, derive_scalar, kdf_x963, CryptoError, CurveParams, EcPoint, OpCounter, PrivateKey};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;
type HmacSha1 = Hmac<Sha1>;

/// HMAC-SHA-1 tag length.
pub const MAC_LEN: usize = 20;
/// Default plaintext budget: one 80-bit secret value.
pub const PLAINTEXT_BUDGET: usize = 10;

const ENC_KEY_LEN: usize = 16;
const MAC_KEY_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncryptOptions {
    pub compressed: bool,
    pub max_plaintext: usize,
}

impl Default for EncryptOptions {
    fn default() -> Self {
        EncryptOptions {
            compressed: false,
            max_plaintext: PLAINTEXT_BUDGET,
        }
    }
}

/// `R || payload || tag`, where `R` is the ephemeral public point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub ephemeral: EcPoint,
    pub compressed: bool,
    pub payload: Vec<u8>,
    pub tag: [u8; MAC_LEN],
}

impl Ciphertext {
    pub fn encoded_len(curve: &CurveParams, compressed: bool, plaintext_len: usize) -> usize {
        curve.point_len(compressed) + plaintext_len + MAC_LEN
    }

    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = curve
            .encode_point_mode(&self.ephemeral, self.compressed)
            .expect("ephemeral point is never infinity");
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Parses and checks that `R` is on the curve.
    pub fn from_bytes(curve: &CurveParams, bytes: &[u8], compressed: bool) -> Result<Ciphertext, CryptoError> {
        let plen = curve.point_len(compressed);
        if bytes.len() < plen + MAC_LEN {
            return Err(CryptoError::Decode(format!(
                "ciphertext too short: {} bytes",
                bytes.len()
            )));
        }
        let ephemeral = curve.decode_point_mode(&bytes[..plen], compressed)?;
        let tag_start = bytes.len() - MAC_LEN;
        let mut tag = [0u8; MAC_LEN];
        tag.copy_from_slice(&bytes[tag_start..]);
        Ok(Ciphertext {
            ephemeral,
            compressed,
            payload: bytes[plen..tag_start].to_vec(),
            tag,
        })
    }
}

fn derive_keys(curve: &CurveParams, shared: &EcPoint) -> ([u8; ENC_KEY_LEN], [u8; MAC_KEY_LEN]) {
    let z = to_fixed_be(shared.x().expect("shared point is finite"), curve.field_len);
    let okm = kdf_x963(&z, b"", ENC_KEY_LEN + MAC_KEY_LEN);
    let mut enc = [0u8; ENC_KEY_LEN];
    let mut mac = [0u8; MAC_KEY_LEN];
    enc.copy_from_slice(&okm[..ENC_KEY_LEN]);
    mac.copy_from_slice(&okm[ENC_KEY_LEN..]);
    (enc, mac)
}

fn apply_keystream(key: &[u8; ENC_KEY_LEN], data: &mut [u8]) {
    // fresh key per message, so a zero counter block is safe
    let mut cipher = Aes128Ctr::new(key.into(), &[0u8; 16].into());
    cipher.apply_keystream(data);
}

fn tag_of(key: &[u8; MAC_KEY_LEN], payload: &[u8]) -> HmacSha1 {
    let mut mac = HmacSha1::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(payload);
    mac
}

/// Encrypts `plaintext` to `public`. The ephemeral scalar is derived from
/// `seed`.
pub fn encrypt(
    curve: &CurveParams,
    public: &EcPoint,
    plaintext: &[u8],
    opts: EncryptOptions,
    seed: u64,
    ops: &mut OpCounter,
) -> Result<Ciphertext, CryptoError> {
    if plaintext.len() > opts.max_plaintext {
        return Err(CryptoError::BudgetExceeded {
            len: plaintext.len(),
            max: opts.max_plaintext,
        });
    }
    if public.is_infinity() || !curve.is_on_curve(public) {
        return Err(CryptoError::InvalidInput("public key not on curve"));
    }
    let mut material = seed.to_be_bytes().to_vec();
    material.extend(curve.encode_point(public)?);
    let k = derive_scalar(curve, b"ecies-ephemeral", &material);
    let ephemeral = curve.mul(&k, &curve.g);
    let shared = curve.mul(&k, public);
    ops.sm += 2;
    if shared.is_infinity() {
        // only possible for keys in a small subgroup
        return Err(CryptoError::InvalidInput("degenerate shared point"));
    }
    let (enc_key, mac_key) = derive_keys(curve, &shared);
    ops.kdf += 1;
    let mut payload = plaintext.to_vec();
    apply_keystream(&enc_key, &mut payload);
    ops.enc += 1;
    let tag: [u8; MAC_LEN] = tag_of(&mac_key, &payload).finalize().into_bytes().into();
    ops.mac += 1;
    Ok(Ciphertext {
        ephemeral,
        compressed: opts.compressed,
        payload,
        tag,
    })
}

/// Recovers the plaintext iff the tag verifies.
pub fn decrypt(
    curve: &CurveParams,
    key: &PrivateKey,
    ct: &Ciphertext,
    ops: &mut OpCounter,
) -> Result<Vec<u8>, CryptoError> {
    if ct.ephemeral.is_infinity() || !curve.is_on_curve(&ct.ephemeral) {
        return Err(CryptoError::Decode("ephemeral point not on curve".into()));
    }
    let shared = curve.mul(key.scalar(), &ct.ephemeral);
    ops.sm += 1;
    if shared.is_infinity() {
        return Err(CryptoError::AuthenticationFailure);
    }
    let (enc_key, mac_key) = derive_keys(curve, &shared);
    ops.kdf += 1;
    let verified = tag_of(&mac_key, &ct.payload).verify_slice(&ct.tag);
    ops.mac += 1;
    if verified.is_err() {
        return Err(CryptoError::AuthenticationFailure);
    }
    let mut plaintext = ct.payload.clone();
    apply_keystream(&enc_key, &mut plaintext);
    ops.dec += 1;
    Ok(plaintext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, CurveId};

    fn secp() -> &'static CurveParams {
        CurveId::Secp160r1.params()
    }

    #[test]
    fn ciphertext_lengths_match_budget() {
        let c = secp();
        let kp = keygen(c, 1);
        let pt = [7u8; 10];
        let ct = encrypt(c, &kp.public, &pt, EncryptOptions::default(), 3, &mut OpCounter::new()).unwrap();
        assert_eq!(ct.to_bytes(c).len(), 70);
        let opts = EncryptOptions {
            compressed: true,
            ..Default::default()
        };
        let ct = encrypt(c, &kp.public, &pt, opts, 3, &mut OpCounter::new()).unwrap();
        assert_eq!(ct.to_bytes(c).len(), 51);
    }

    #[test]
    fn lengths_for_every_plaintext_size() {
        let c = secp();
        let kp = keygen(c, 1);
        for len in 1..=10usize {
            let pt = vec![0xA5u8; len];
            for compressed in [false, true] {
                let opts = EncryptOptions {
                    compressed,
                    ..Default::default()
                };
                let ct = encrypt(c, &kp.public, &pt, opts, len as u64, &mut OpCounter::new()).unwrap();
                let bytes = ct.to_bytes(c);
                let expected = if compressed { 21 + len + 20 } else { 40 + len + 20 };
                assert_eq!(bytes.len(), expected);
                assert_eq!(Ciphertext::encoded_len(c, compressed, len), expected);
                let back = Ciphertext::from_bytes(c, &bytes, compressed).unwrap();
                assert_eq!(decrypt(c, &kp.private, &back, &mut OpCounter::new()).unwrap(), pt);
            }
        }
    }

    #[test]
    fn oversize_plaintext_rejected() {
        let c = secp();
        let kp = keygen(c, 1);
        let err = encrypt(
            c,
            &kp.public,
            &[0u8; 11],
            EncryptOptions::default(),
            0,
            &mut OpCounter::new(),
        )
        .unwrap_err();
        assert_eq!(err, CryptoError::BudgetExceeded { len: 11, max: 10 });
    }

    #[test]
    fn op_counts_match_cost_table() {
        let c = secp();
        let kp = keygen(c, 1);
        let mut ops = OpCounter::new();
        let ct = encrypt(c, &kp.public, b"0123456789", EncryptOptions::default(), 0, &mut ops).unwrap();
        assert_eq!(
            ops,
            OpCounter {
                sm: 2,
                enc: 1,
                mac: 1,
                kdf: 1,
                ..Default::default()
            }
        );
        let mut ops = OpCounter::new();
        decrypt(c, &kp.private, &ct, &mut ops).unwrap();
        assert_eq!(
            ops,
            OpCounter {
                sm: 1,
                dec: 1,
                mac: 1,
                kdf: 1,
                ..Default::default()
            }
        );
    }

    #[test]
    fn flipped_payload_bit_fails_authentication() {
        let c = secp();
        let kp = keygen(c, 1);
        let mut ct = encrypt(
            c,
            &kp.public,
            b"secret-key",
            EncryptOptions::default(),
            0,
            &mut OpCounter::new(),
        )
        .unwrap();
        ct.payload[3] ^= 0x10;
        assert_eq!(
            decrypt(c, &kp.private, &ct, &mut OpCounter::new()),
            Err(CryptoError::AuthenticationFailure)
        );
    }

    #[test]
    fn wrong_private_key_fails_authentication() {
        let c = secp();
        let a = keygen(c, 1);
        let b = keygen(c, 2);
        let ct = encrypt(
            c,
            &a.public,
            b"secret-key",
            EncryptOptions::default(),
            0,
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(
            decrypt(c, &b.private, &ct, &mut OpCounter::new()),
            Err(CryptoError::AuthenticationFailure)
        );
    }

    #[test]
    fn off_curve_ephemeral_is_decode_error() {
        let c = secp();
        let kp = keygen(c, 1);
        let ct = encrypt(c, &kp.public, b"x", EncryptOptions::default(), 0, &mut OpCounter::new()).unwrap();
        let mut bytes = ct.to_bytes(c);
        bytes[5] ^= 0xFF;
        assert!(matches!(
            Ciphertext::from_bytes(c, &bytes, false),
            Err(CryptoError::Decode(_))
        ));
    }

    #[test]
    fn same_seed_same_ciphertext() {
        let c = secp();
        let kp = keygen(c, 1);
        let a = encrypt(
            c,
            &kp.public,
            b"abc",
            EncryptOptions::default(),
            9,
            &mut OpCounter::new(),
        )
        .unwrap();
        let b = encrypt(
            c,
            &kp.public,
            b"abc",
            EncryptOptions::default(),
            9,
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
