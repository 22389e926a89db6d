use num_bigint::BigUint;
use num_traits::Zero;

use super::{
    curve::to_fixed_be, derive_scalar, sha1, CryptoError, CurveParams, EcPoint, OpCounter, PrivateKey, HASH_LEN,
};

/// ECDSA signature `(r, s)`, serialized as two `field_len`-byte big-endian
/// integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    pub r: BigUint,
    pub s: BigUint,
}

impl Signature {
    pub fn encoded_len(curve: &CurveParams) -> usize {
        2 * curve.field_len
    }

    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = to_fixed_be(&self.r, curve.field_len);
        out.extend(to_fixed_be(&self.s, curve.field_len));
        out
    }

    pub fn from_bytes(curve: &CurveParams, bytes: &[u8]) -> Result<Signature, CryptoError> {
        let l = curve.field_len;
        if bytes.len() != 2 * l {
            return Err(CryptoError::Decode(format!(
                "signature must be {} bytes, got {}",
                2 * l,
                bytes.len()
            )));
        }
        Ok(Signature {
            r: BigUint::from_bytes_be(&bytes[..l]),
            s: BigUint::from_bytes_be(&bytes[l..]),
        })
    }
}

/// Leftmost `bits(n)` bits of the digest as an integer.
fn digest_to_int(curve: &CurveParams, digest: &[u8; HASH_LEN]) -> BigUint {
    let e = BigUint::from_bytes_be(digest);
    let hash_bits = (HASH_LEN * 8) as u64;
    let n_bits = curve.n.bits();
    if n_bits < hash_bits {
        e >> (hash_bits - n_bits)
    } else {
        e
    }
}

/// Signs `SHA-1(message)`. The per-signature nonce is derived from the
/// private key, the digest and `seed`, so signing is reproducible.
pub fn sign(
    curve: &CurveParams,
    key: &PrivateKey,
    message: &[u8],
    seed: u64,
    ops: &mut OpCounter,
) -> Result<Signature, CryptoError> {
    if message.is_empty() {
        return Err(CryptoError::EmptyMessage);
    }
    let digest = sha1(message);
    ops.hash += 1;
    let e = digest_to_int(curve, &digest);
    let d = key.scalar();
    let n = &curve.n;
    let limit = BigUint::from(1u32) << (8 * curve.field_len);

    let mut material = key.to_bytes(curve);
    material.extend_from_slice(&digest);
    material.extend_from_slice(&seed.to_be_bytes());
    let base_len = material.len();
    for attempt in 0u32.. {
        material.truncate(base_len);
        material.extend_from_slice(&attempt.to_be_bytes());
        let k = derive_scalar(curve, b"ecdsa-nonce", &material);
        let point = curve.mul(&k, &curve.g);
        ops.sm += 1;
        let r = match point.x() {
            Some(x) => x % n,
            None => continue,
        };
        if r.is_zero() || r >= limit {
            continue;
        }
        let kinv = k.modinv(n).expect("n is prime");
        let s = (kinv * ((&e + &r * d) % n)) % n;
        if s.is_zero() || s >= limit {
            continue;
        }
        return Ok(Signature { r, s });
    }
    unreachable!("nonce search is unbounded")
}

/// Checks `sig` over `SHA-1(message)` under `public`. An off-curve or
/// infinite key is an input error, not a failed verification.
pub fn verify(
    curve: &CurveParams,
    public: &EcPoint,
    message: &[u8],
    sig: &Signature,
    ops: &mut OpCounter,
) -> Result<bool, CryptoError> {
    if public.is_infinity() || !curve.is_on_curve(public) {
        return Err(CryptoError::InvalidInput("public key not on curve"));
    }
    let n = &curve.n;
    if sig.r.is_zero() || sig.s.is_zero() || &sig.r >= n || &sig.s >= n {
        return Ok(false);
    }
    let digest = sha1(message);
    ops.hash += 1;
    let e = digest_to_int(curve, &digest);
    let w = sig.s.modinv(n).expect("s is invertible mod prime n");
    let u1 = (&e * &w) % n;
    let u2 = (&sig.r * &w) % n;
    let a = curve.mul(&u1, &curve.g);
    let b = curve.mul(&u2, public);
    ops.sm += 2;
    let sum = curve.add(&a, &b);
    ops.pa += 1;
    Ok(match sum.x() {
        Some(x) => x % n == sig.r,
        None => false,
    })
}
