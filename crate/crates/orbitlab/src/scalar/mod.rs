//! Scalar arithmetic: exact rationals with automatic promotion to
//! high-precision floats once an irrational coefficient enters a computation.

pub mod mpfloat;

pub use mpfloat::{exp, ln, ln2, pi, pow2, MpFloat, Round};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

/// A coefficient: exact rational when possible, `MpFloat` otherwise.
#[derive(Clone, Debug)]
pub enum Scalar {
    Q(BigRational),
    F(MpFloat),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Q(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Q(BigRational::one())
    }

    pub fn from_int(v: i128) -> Self {
        Scalar::Q(BigRational::from(BigInt::from(v)))
    }

    pub fn from_u128(v: u128) -> Self {
        Scalar::Q(BigRational::from(BigInt::from(v)))
    }

    pub fn ratio(n: i128, d: i128) -> Self {
        Scalar::Q(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// 2^k as an exact rational (k may be negative).
    pub fn pow2_int(k: i64) -> Self {
        if k >= 0 {
            Scalar::Q(BigRational::from(BigInt::one() << k as u32))
        } else {
            Scalar::Q(BigRational::new(BigInt::one(), BigInt::one() << (-k) as u32))
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Q(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Q(q) => q.is_zero(),
            Scalar::F(f) => f.is_zero(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Q(q) => q.is_negative(),
            Scalar::F(f) => f.is_negative(),
        }
    }

    pub fn to_float(&self, prec: u32, mode: Round) -> MpFloat {
        match self {
            Scalar::Q(q) => MpFloat::from_ratio(q, prec, mode),
            Scalar::F(f) => f.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Q(q) => q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN),
            Scalar::F(f) => f.to_f64(),
        }
    }

    /// Approximate log2 of the magnitude; `NEG_INFINITY` for zero.
    pub fn log2_f64(&self) -> f64 {
        match self {
            Scalar::Q(q) => {
                if q.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    let nb = q.numer().magnitude().bits() as f64;
                    let db = q.denom().magnitude().bits() as f64;
                    // refine with the leading 64 bits of each side
                    let nf = top_bits_f64(q.numer());
                    let df = top_bits_f64(q.denom());
                    (nb - db) + (nf.log2() - df.log2())
                }
            }
            Scalar::F(f) => f.log2_f64(),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Scalar::Q(q) => Scalar::Q(-q.clone()),
            Scalar::F(f) => Scalar::F(f.neg()),
        }
    }

    pub fn abs(&self) -> Self {
        match self {
            Scalar::Q(q) => Scalar::Q(q.abs()),
            Scalar::F(f) => Scalar::F(f.abs()),
        }
    }

    pub fn add(&self, other: &Self, prec: u32, mode: Round) -> Self {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a + b),
            _ => Scalar::F(self.to_float(prec, mode).add(&other.to_float(prec, mode), mode)),
        }
    }

    pub fn sub(&self, other: &Self, prec: u32, mode: Round) -> Self {
        self.add(&other.neg(), prec, mode)
    }

    pub fn mul(&self, other: &Self, prec: u32, mode: Round) -> Self {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => Scalar::Q(a * b),
            _ => Scalar::F(self.to_float(prec, mode).mul(&other.to_float(prec, mode), mode)),
        }
    }

    pub fn div(&self, other: &Self, prec: u32, mode: Round) -> Self {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => {
                assert!(!b.is_zero(), "rational division by zero");
                Scalar::Q(a / b)
            }
            _ => Scalar::F(self.to_float(prec, mode).div(&other.to_float(prec, mode), mode)),
        }
    }

    /// Exact value comparison. Avoids materializing huge powers of two.
    pub fn cmp_val(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Q(a), Scalar::Q(b)) => a.cmp(b),
            _ => {
                let a = self;
                let b = other;
                let (an, bn) = (a.is_negative() && !a.is_zero(), b.is_negative() && !b.is_zero());
                let (az, bz) = (a.is_zero(), b.is_zero());
                match (az, bz) {
                    (true, true) => return Ordering::Equal,
                    (true, false) => return if bn { Ordering::Greater } else { Ordering::Less },
                    (false, true) => return if an { Ordering::Less } else { Ordering::Greater },
                    _ => {}
                }
                if an != bn {
                    return if an { Ordering::Less } else { Ordering::Greater };
                }
                let la = a.log2_f64();
                let lb = b.log2_f64();
                if (la - lb).abs() > 4.0 {
                    let mag = if la > lb { Ordering::Greater } else { Ordering::Less };
                    return if an { mag.reverse() } else { mag };
                }
                // close in magnitude: exact cross-compare (shift is bounded
                // because the log2 gap is, given both operands are materialized)
                let (n1, e1) = a.as_scaled();
                let (n2, e2) = b.as_scaled();
                let (m1, m2) = if e1 >= e2 {
                    (n1 << (e1 - e2) as u32, n2)
                } else {
                    (n1, n2 << (e2 - e1) as u32)
                };
                m1.cmp(&m2)
            }
        }
    }

    /// Magnitude comparison |self| vs |other|.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        self.abs().cmp_val(&other.abs())
    }

    /// Dyadic approximation `(numerator, exponent)` with value close to
    /// `numerator * 2^exponent`; used only to order nearby magnitudes, where
    /// the alignment shift stays small. Rationals are scaled to 192 guard
    /// bits, which exceeds every comparison tolerance used by callers.
    fn as_scaled(&self) -> (BigInt, i64) {
        match self {
            Scalar::F(f) => {
                let (m, e) = f.parts();
                (m.clone(), e)
            }
            Scalar::Q(q) => {
                let shift = 192u32;
                let n = (q.numer().clone() << shift) / q.denom();
                (n, -(shift as i64))
            }
        }
    }
}

fn top_bits_f64(v: &BigInt) -> f64 {
    let bits = v.magnitude().bits();
    if bits == 0 {
        return 1.0;
    }
    let take = bits.min(53);
    let head = (v.magnitude() >> (bits - take)).to_u64().unwrap_or(1) as f64;
    head / (take as f64).exp2() * 2.0
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Q(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Scalar::F(x) => write!(f, "{}", x),
        }
    }
}

/// Serialize for the text exports: rationals as `num/den`, floats as hex.
pub fn scalar_to_token(s: &Scalar) -> String {
    match s {
        Scalar::Q(q) => format!("{}/{}", q.numer(), q.denom()),
        Scalar::F(f) => f.to_hex(),
    }
}

pub fn scalar_from_token(tok: &str, prec: u32) -> Option<Scalar> {
    if tok.contains("0x") {
        return MpFloat::from_hex(tok, prec).map(Scalar::F);
    }
    if let Some(slash) = tok.find('/') {
        let n = BigInt::parse_bytes(tok[..slash].as_bytes(), 10)?;
        let d = BigInt::parse_bytes(tok[slash + 1..].as_bytes(), 10)?;
        if d.is_zero() {
            return None;
        }
        return Some(Scalar::Q(BigRational::new(n, d)));
    }
    BigInt::parse_bytes(tok.as_bytes(), 10).map(|n| Scalar::Q(BigRational::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_path_stays_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        let s = a.add(&b, 128, Round::Nearest);
        assert!(s.is_exact());
        assert_eq!(s.cmp_val(&Scalar::ratio(1, 2)), Ordering::Equal);
    }

    #[test]
    fn mixed_promotes() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::F(MpFloat::from_i64(2, 128));
        let p = a.mul(&b, 128, Round::Nearest);
        assert!(!p.is_exact());
        assert!((p.to_f64() - 2.0 / 3.0).abs() < 1e-30);
    }

    #[test]
    fn compare_across_kinds() {
        let a = Scalar::ratio(7, 2);
        let b = Scalar::F(MpFloat::from_i64(4, 128));
        assert_eq!(a.cmp_val(&b), Ordering::Less);
        let c = Scalar::F(MpFloat::from_i64(3, 128));
        assert_eq!(a.cmp_val(&c), Ordering::Greater);
        let d = Scalar::F(MpFloat::from_ratio(&BigRational::new(7.into(), 2.into()), 128, Round::Nearest));
        assert_eq!(a.cmp_val(&d), Ordering::Equal);
    }

    #[test]
    fn token_roundtrip() {
        for s in [Scalar::ratio(-22, 7), Scalar::F(MpFloat::from_i64(99, 160))] {
            let tok = scalar_to_token(&s);
            let back = scalar_from_token(&tok, 160).unwrap();
            assert_eq!(s.cmp_val(&back), Ordering::Equal);
        }
    }
}
