//! Short-Weierstrass curves `y^2 = x^3 + ax + b` over a prime field.
//!
//! Points are kept affine at API boundaries. Scalar multiplication runs in
//! Jacobian coordinates internally and normalizes once at the end.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Curves known by identifier. Bundles and manifests refer to curves by id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveId {
    /// SEC 2 `secp160r1`, the 80-bit security default.
    #[serde(rename = "secp160r1")]
    Secp160r1,
    /// A 16-bit prime-order curve for exhaustive tests and fast simulations.
    #[serde(rename = "toy16")]
    Toy16,
}

impl CurveId {
    pub fn name(self) -> &'static str {
        match self {
            CurveId::Secp160r1 => "secp160r1",
            CurveId::Toy16 => "toy16",
        }
    }

    pub fn from_name(name: &str) -> Option<CurveId> {
        match name {
            "secp160r1" => Some(CurveId::Secp160r1),
            "toy16" => Some(CurveId::Toy16),
            _ => None,
        }
    }

    pub fn params(self) -> &'static CurveParams {
        static SECP160R1: OnceLock<CurveParams> = OnceLock::new();
        static TOY16: OnceLock<CurveParams> = OnceLock::new();
        match self {
            CurveId::Secp160r1 => SECP160R1.get_or_init(|| {
                CurveParams::new(
                    "secp160r1",
                    hex_uint("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF"),
                    hex_uint("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFC"),
                    hex_uint("1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45"),
                    (
                        hex_uint("4A96B5688EF573284664698968C38BB913CBFC82"),
                        hex_uint("23A628553168947D59DCC912042351377AC5FB32"),
                    ),
                    hex_uint("0100000000000000000001F4C8F927AED3CA752257"),
                    1,
                )
                .expect("secp160r1 parameters are valid")
            }),
            CurveId::Toy16 => TOY16.get_or_init(|| {
                CurveParams::new(
                    "toy16",
                    BigUint::from(65519u32),
                    BigUint::from(65516u32),
                    BigUint::from(76u32),
                    (BigUint::from(2u32), BigUint::from(25056u32)),
                    BigUint::from(65447u32),
                    1,
                )
                .expect("toy16 parameters are valid")
            }),
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn hex_uint(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("valid hex constant")
}

/// A point on the curve, or the point at infinity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum EcPoint {
    Infinity,
    Affine { x: BigUint, y: BigUint },
}

impl EcPoint {
    pub fn new(x: BigUint, y: BigUint) -> EcPoint {
        EcPoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, EcPoint::Infinity)
    }

    pub fn x(&self) -> Option<&BigUint> {
        match self {
            EcPoint::Infinity => None,
            EcPoint::Affine { x, .. } => Some(x),
        }
    }

    pub fn y(&self) -> Option<&BigUint> {
        match self {
            EcPoint::Infinity => None,
            EcPoint::Affine { y, .. } => Some(y),
        }
    }
}

impl fmt::Debug for EcPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EcPoint::Infinity => f.write_str("O"),
            EcPoint::Affine { x, y } => write!(f, "({:x}, {:x})", x, y),
        }
    }
}

/// Domain parameters of a prime-field curve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveParams {
    pub name: String,
    pub p: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub g: EcPoint,
    pub n: BigUint,
    pub h: u32,
    /// Field-element byte length, `ceil(bits(p) / 8)`.
    pub field_len: usize,
}

impl CurveParams {
    /// Builds and validates a parameter set: non-singular, `G` on the curve
    /// with order `n`.
    pub fn new(
        name: &str,
        p: BigUint,
        a: BigUint,
        b: BigUint,
        g: (BigUint, BigUint),
        n: BigUint,
        h: u32,
    ) -> Result<CurveParams, CryptoError> {
        if p < BigUint::from(5u32) || a >= p || b >= p {
            return Err(CryptoError::InvalidCurve("coefficients out of range".into()));
        }
        let field_len = p.bits().div_ceil(8) as usize;
        let curve = CurveParams {
            name: name.to_string(),
            p,
            a,
            b,
            g: EcPoint::new(g.0, g.1),
            n,
            h,
            field_len,
        };
        let f = curve.field();
        let a3 = f.mul(&f.sqr(&curve.a), &curve.a);
        let disc = f.add(
            &f.mul(&BigUint::from(4u32), &a3),
            &f.mul(&BigUint::from(27u32), &f.sqr(&curve.b)),
        );
        if disc.is_zero() {
            return Err(CryptoError::InvalidCurve("singular curve: 4a^3 + 27b^2 = 0".into()));
        }
        if !curve.is_on_curve(&curve.g) || curve.g.is_infinity() {
            return Err(CryptoError::InvalidCurve("base point not on curve".into()));
        }
        if curve.n < BigUint::from(2u32) || !curve.mul(&curve.n, &curve.g).is_infinity() {
            return Err(CryptoError::InvalidCurve("base point order mismatch".into()));
        }
        Ok(curve)
    }

    /// Byte length of a scalar modulo `n`.
    pub fn scalar_len(&self) -> usize {
        self.n.bits().div_ceil(8) as usize
    }

    pub(crate) fn field(&self) -> Field<'_> {
        Field { p: &self.p }
    }

    pub fn is_on_curve(&self, pt: &EcPoint) -> bool {
        match pt {
            EcPoint::Infinity => true,
            EcPoint::Affine { x, y } => {
                if x >= &self.p || y >= &self.p {
                    return false;
                }
                let f = self.field();
                f.sqr(y) == self.rhs(x)
            }
        }
    }

    /// `x^3 + ax + b mod p`
    fn rhs(&self, x: &BigUint) -> BigUint {
        let f = self.field();
        let x3 = f.mul(&f.sqr(x), x);
        f.add(&f.add(&x3, &f.mul(&self.a, x)), &self.b)
    }

    pub fn negate(&self, pt: &EcPoint) -> EcPoint {
        match pt {
            EcPoint::Infinity => EcPoint::Infinity,
            EcPoint::Affine { x, y } => EcPoint::new(x.clone(), self.field().neg(y)),
        }
    }

    /// Affine point addition.
    pub fn add(&self, p1: &EcPoint, p2: &EcPoint) -> EcPoint {
        let acc = Jacobian::from_affine(p1);
        self.to_affine(&self.jadd_mixed(&acc, p2))
    }

    pub fn double(&self, pt: &EcPoint) -> EcPoint {
        self.to_affine(&self.jdouble(&Jacobian::from_affine(pt)))
    }

    /// `k * P` by left-to-right double-and-add.
    pub fn mul(&self, k: &BigUint, pt: &EcPoint) -> EcPoint {
        if pt.is_infinity() || k.is_zero() {
            return EcPoint::Infinity;
        }
        let mut acc = Jacobian::infinity();
        for i in (0..k.bits()).rev() {
            acc = self.jdouble(&acc);
            if k.bit(i) {
                acc = self.jadd_mixed(&acc, pt);
            }
        }
        self.to_affine(&acc)
    }

    /// Serializes as `x || y`, each `field_len` bytes, no prefix byte.
    pub fn encode_point(&self, pt: &EcPoint) -> Result<Vec<u8>, CryptoError> {
        match pt {
            EcPoint::Infinity => Err(CryptoError::InvalidInput("point at infinity has no encoding")),
            EcPoint::Affine { x, y } => {
                let mut out = to_fixed_be(x, self.field_len);
                out.extend(to_fixed_be(y, self.field_len));
                Ok(out)
            }
        }
    }

    pub fn decode_point(&self, bytes: &[u8]) -> Result<EcPoint, CryptoError> {
        let l = self.field_len;
        if bytes.len() != 2 * l {
            return Err(CryptoError::Decode(format!(
                "point encoding must be {} bytes, got {}",
                2 * l,
                bytes.len()
            )));
        }
        let pt = EcPoint::new(BigUint::from_bytes_be(&bytes[..l]), BigUint::from_bytes_be(&bytes[l..]));
        if !self.is_on_curve(&pt) {
            return Err(CryptoError::Decode("point not on curve".into()));
        }
        Ok(pt)
    }

    /// Compressed form: `x` (`field_len` bytes) followed by one parity byte.
    pub fn compress_point(&self, pt: &EcPoint) -> Result<Vec<u8>, CryptoError> {
        match pt {
            EcPoint::Infinity => Err(CryptoError::InvalidInput("point at infinity has no encoding")),
            EcPoint::Affine { x, y } => {
                let mut out = to_fixed_be(x, self.field_len);
                out.push(u8::from(y.bit(0)));
                Ok(out)
            }
        }
    }

    pub fn decompress_point(&self, bytes: &[u8]) -> Result<EcPoint, CryptoError> {
        let l = self.field_len;
        if bytes.len() != l + 1 {
            return Err(CryptoError::Decode(format!(
                "compressed point must be {} bytes, got {}",
                l + 1,
                bytes.len()
            )));
        }
        let parity = match bytes[l] {
            0 => false,
            1 => true,
            other => return Err(CryptoError::Decode(format!("bad parity byte {other:#04x}"))),
        };
        let x = BigUint::from_bytes_be(&bytes[..l]);
        if x >= self.p {
            return Err(CryptoError::Decode("x coordinate out of range".into()));
        }
        let y = self
            .field()
            .sqrt(&self.rhs(&x))
            .ok_or_else(|| CryptoError::Decode("x has no point on the curve".into()))?;
        let y = if y.bit(0) == parity {
            y
        } else if y.is_zero() {
            return Err(CryptoError::Decode("no point with requested parity".into()));
        } else {
            self.field().neg(&y)
        };
        Ok(EcPoint::new(x, y))
    }

    /// Length of a point under the chosen serialization mode.
    pub fn point_len(&self, compressed: bool) -> usize {
        if compressed {
            self.field_len + 1
        } else {
            2 * self.field_len
        }
    }

    pub fn encode_point_mode(&self, pt: &EcPoint, compressed: bool) -> Result<Vec<u8>, CryptoError> {
        if compressed {
            self.compress_point(pt)
        } else {
            self.encode_point(pt)
        }
    }

    pub fn decode_point_mode(&self, bytes: &[u8], compressed: bool) -> Result<EcPoint, CryptoError> {
        if compressed {
            self.decompress_point(bytes)
        } else {
            self.decode_point(bytes)
        }
    }

    fn jdouble(&self, pt: &Jacobian) -> Jacobian {
        if pt.is_infinity() || pt.y.is_zero() {
            return Jacobian::infinity();
        }
        let f = self.field();
        let xx = f.sqr(&pt.x);
        let yy = f.sqr(&pt.y);
        let yyyy = f.sqr(&yy);
        let zz = f.sqr(&pt.z);
        let s = f.mul(&BigUint::from(4u32), &f.mul(&pt.x, &yy));
        let m = f.add(&f.mul(&BigUint::from(3u32), &xx), &f.mul(&self.a, &f.sqr(&zz)));
        let x3 = f.sub(&f.sqr(&m), &f.add(&s, &s));
        let y3 = f.sub(&f.mul(&m, &f.sub(&s, &x3)), &f.mul(&BigUint::from(8u32), &yyyy));
        let z3 = f.mul(&BigUint::from(2u32), &f.mul(&pt.y, &pt.z));
        Jacobian { x: x3, y: y3, z: z3 }
    }

    /// Jacobian + affine.
    fn jadd_mixed(&self, acc: &Jacobian, pt: &EcPoint) -> Jacobian {
        let (x2, y2) = match pt {
            EcPoint::Infinity => return acc.clone(),
            EcPoint::Affine { x, y } => (x, y),
        };
        if acc.is_infinity() {
            return Jacobian::from_affine(pt);
        }
        let f = self.field();
        let z1z1 = f.sqr(&acc.z);
        let u2 = f.mul(x2, &z1z1);
        let s2 = f.mul(y2, &f.mul(&acc.z, &z1z1));
        if u2 == acc.x {
            return if s2 == acc.y {
                self.jdouble(acc)
            } else {
                Jacobian::infinity()
            };
        }
        let h = f.sub(&u2, &acc.x);
        let r = f.sub(&s2, &acc.y);
        let hh = f.sqr(&h);
        let hhh = f.mul(&hh, &h);
        let v = f.mul(&acc.x, &hh);
        let x3 = f.sub(&f.sub(&f.sqr(&r), &hhh), &f.add(&v, &v));
        let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.mul(&acc.y, &hhh));
        let z3 = f.mul(&acc.z, &h);
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn to_affine(&self, pt: &Jacobian) -> EcPoint {
        if pt.is_infinity() {
            return EcPoint::Infinity;
        }
        let f = self.field();
        let zinv = f.inv(&pt.z).expect("z is nonzero mod prime p");
        let zinv2 = f.sqr(&zinv);
        EcPoint::new(f.mul(&pt.x, &zinv2), f.mul(&pt.y, &f.mul(&zinv2, &zinv)))
    }
}

#[derive(Clone, Debug)]
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl Jacobian {
    fn infinity() -> Jacobian {
        Jacobian {
            x: BigUint::one(),
            y: BigUint::one(),
            z: BigUint::zero(),
        }
    }

    fn from_affine(pt: &EcPoint) -> Jacobian {
        match pt {
            EcPoint::Infinity => Jacobian::infinity(),
            EcPoint::Affine { x, y } => Jacobian {
                x: x.clone(),
                y: y.clone(),
                z: BigUint::one(),
            },
        }
    }

    fn is_infinity(&self) -> bool {
        self.z.is_zero()
    }
}

/// Arithmetic modulo a prime.
#[derive(Clone, Copy)]
pub(crate) struct Field<'a> {
    pub p: &'a BigUint,
}

impl Field<'_> {
    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if &s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    pub fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    pub fn neg(&self, a: &BigUint) -> BigUint {
        if a.is_zero() {
            BigUint::zero()
        } else {
            self.p - a
        }
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % self.p
    }

    pub fn sqr(&self, a: &BigUint) -> BigUint {
        (a * a) % self.p
    }

    pub fn inv(&self, a: &BigUint) -> Option<BigUint> {
        a.modinv(self.p)
    }

    /// Square root mod p (Tonelli-Shanks, with the `p = 3 mod 4` shortcut).
    pub fn sqrt(&self, a: &BigUint) -> Option<BigUint> {
        let p = self.p;
        let a = a % p;
        if a.is_zero() {
            return Some(BigUint::zero());
        }
        let one = BigUint::one();
        let pm1 = p - &one;
        let legendre = a.modpow(&(&pm1 >> 1), p);
        if legendre != one {
            return None;
        }
        if p % 4u32 == BigUint::from(3u32) {
            return Some(a.modpow(&((p + &one) >> 2), p));
        }
        // p - 1 = q * 2^s with q odd
        let mut q = pm1.clone();
        let mut s = 0u32;
        while q.is_even() {
            q >>= 1;
            s += 1;
        }
        let mut z = BigUint::from(2u32);
        while z.modpow(&(&pm1 >> 1), p) != pm1 {
            z += 1u32;
        }
        let mut m = s;
        let mut c = z.modpow(&q, p);
        let mut t = a.modpow(&q, p);
        let mut r = a.modpow(&((&q + &one) >> 1), p);
        while t != one {
            let mut i = 0u32;
            let mut t2 = t.clone();
            while t2 != one {
                t2 = self.sqr(&t2);
                i += 1;
            }
            let mut b = c.clone();
            for _ in 0..(m - i - 1) {
                b = self.sqr(&b);
            }
            m = i;
            c = self.sqr(&b);
            t = self.mul(&t, &c);
            r = self.mul(&r, &b);
        }
        Some(r)
    }
}

/// Big-endian encoding left-padded to `len` bytes. Panics if `v` does not fit.
pub fn to_fixed_be(v: &BigUint, len: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let raw = if v.is_zero() { Vec::new() } else { raw };
    assert!(raw.len() <= len, "value does not fit in {len} bytes");
    let mut out = vec![0u8; len - raw.len()];
    out.extend(raw);
    out
}
