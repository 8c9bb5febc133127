//! Arbitrary-precision binary floating point on top of `BigInt`.
//!
//! A value is `mant * 2^exp` with `2^(prec-1) <= |mant| < 2^prec` (or zero).
//! Addition and multiplication are computed exactly and then rounded once;
//! division, square roots and the elementary transcendentals round with a
//! sticky bit, so every primitive is accurate to <= 1 ulp in the requested
//! direction. Directed modes (`Floor`/`Ceil`) are what the certification
//! paths use when a one-sided bound matters.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

/// Rounding direction for the final normalization step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Nearest,
    Floor,
    Ceil,
}

#[derive(Clone, Debug)]
pub struct MpFloat {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

fn bit_len(m: &BigInt) -> u64 {
    m.magnitude().bits()
}

impl MpFloat {
    pub fn zero(prec: u32) -> Self {
        MpFloat { mant: BigInt::zero(), exp: 0, prec }
    }

    pub fn one(prec: u32) -> Self {
        MpFloat::from_i64(1, prec)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Raw `(mantissa, exponent)` with value `mant * 2^exp`.
    pub fn parts(&self) -> (&BigInt, i64) {
        (&self.mant, self.exp)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Self::from_bigint_scaled(BigInt::from(v), 0, prec, Round::Nearest)
    }

    pub fn from_u128(v: u128, prec: u32) -> Self {
        Self::from_bigint_scaled(BigInt::from(v), 0, prec, Round::Nearest)
    }

    pub fn from_bigint(v: BigInt, prec: u32) -> Self {
        Self::from_bigint_scaled(v, 0, prec, Round::Nearest)
    }

    /// Normalize `m * 2^e` to `prec` bits, rounding in `mode`.
    pub fn from_bigint_scaled(m: BigInt, e: i64, prec: u32, mode: Round) -> Self {
        assert!(prec >= 8, "precision too small");
        if m.is_zero() {
            return MpFloat::zero(prec);
        }
        let bits = bit_len(&m);
        let target = prec as u64;
        if bits <= target {
            let shift = (target - bits) as i64;
            return MpFloat { mant: m << shift as u32, exp: e - shift, prec };
        }
        let drop = (bits - target) as u32;
        let neg = m.is_negative();
        let mag = m.magnitude().clone();
        let kept = &mag >> drop;
        let rem = &mag - (&kept << drop);
        let mut kept = kept;
        let round_up_mag = if rem.is_zero() {
            false
        } else {
            match mode {
                Round::Nearest => {
                    let half = BigUint::one() << (drop - 1);
                    match rem.cmp(&half) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => kept.is_odd(),
                    }
                }
                Round::Floor => neg,
                Round::Ceil => !neg,
            }
        };
        if round_up_mag {
            kept += BigUint::one();
        }
        let mut exp = e + drop as i64;
        if bit_len(&BigInt::from(kept.clone())) > target {
            // carry produced an extra bit (mantissa was all ones)
            kept >>= 1;
            exp += 1;
        }
        let mant = if neg { -BigInt::from(kept) } else { BigInt::from(kept) };
        MpFloat { mant, exp, prec }
    }

    pub fn from_ratio(r: &BigRational, prec: u32, mode: Round) -> Self {
        Self::div_bigint(r.numer().clone(), r.denom().clone(), prec, mode)
    }

    /// `n / d` rounded to `prec` bits.
    pub fn div_bigint(n: BigInt, d: BigInt, prec: u32, mode: Round) -> Self {
        assert!(!d.is_zero());
        if n.is_zero() {
            return MpFloat::zero(prec);
        }
        let shift = prec as u64 + 3 + bit_len(&d);
        let scaled = n.clone() << shift as u32;
        let (mut q, r) = scaled.div_rem(&d);
        if !r.is_zero() {
            // encode the open interval around the true quotient as floor + half
            if n.is_negative() != d.is_negative() {
                q -= 1;
            }
            q = q * 2 + 1;
            return Self::from_bigint_scaled(q, -(shift as i64) - 1, prec, mode);
        }
        Self::from_bigint_scaled(q, -(shift as i64), prec, mode)
    }

    /// Exact value as a rational (mant * 2^exp).
    pub fn to_ratio(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from(self.mant.clone() << self.exp as u32)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u32)
        }
    }

    pub fn neg(&self) -> Self {
        MpFloat { mant: -self.mant.clone(), exp: self.exp, prec: self.prec }
    }

    pub fn abs(&self) -> Self {
        MpFloat { mant: self.mant.abs(), exp: self.exp, prec: self.prec }
    }

    fn join_prec(&self, other: &Self) -> u32 {
        self.prec.max(other.prec)
    }

    pub fn add(&self, other: &Self, mode: Round) -> Self {
        let prec = self.join_prec(other);
        if self.is_zero() {
            return Self::from_bigint_scaled(other.mant.clone(), other.exp, prec, mode);
        }
        if other.is_zero() {
            return Self::from_bigint_scaled(self.mant.clone(), self.exp, prec, mode);
        }
        let (hi, lo) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        let gap = hi.exp - lo.exp;
        let limit = prec as i64 + 8;
        if gap > limit + lo.prec as i64 {
            // the low addend only matters as a sticky direction
            let sticky_exp = hi.exp - limit - 2;
            let mut m = hi.mant.clone() << (hi.exp - sticky_exp) as u32;
            if lo.mant.is_positive() {
                m += 1;
            } else {
                m -= 1;
            }
            return Self::from_bigint_scaled(m, sticky_exp, prec, mode);
        }
        let m = (hi.mant.clone() << gap as u32) + &lo.mant;
        Self::from_bigint_scaled(m, lo.exp, prec, mode)
    }

    pub fn sub(&self, other: &Self, mode: Round) -> Self {
        self.add(&other.neg(), mode)
    }

    pub fn mul(&self, other: &Self, mode: Round) -> Self {
        let prec = self.join_prec(other);
        if self.is_zero() || other.is_zero() {
            return MpFloat::zero(prec);
        }
        Self::from_bigint_scaled(&self.mant * &other.mant, self.exp + other.exp, prec, mode)
    }

    pub fn div(&self, other: &Self, mode: Round) -> Self {
        assert!(!other.is_zero(), "division by zero");
        let prec = self.join_prec(other);
        if self.is_zero() {
            return MpFloat::zero(prec);
        }
        let shift = prec as u64 + 3 + bit_len(&other.mant);
        let scaled = self.mant.clone() << shift as u32;
        let (mut q, r) = scaled.div_rem(&other.mant);
        let mut e = self.exp - other.exp - shift as i64;
        if !r.is_zero() {
            if self.mant.is_negative() != other.mant.is_negative() {
                q -= 1;
            }
            q = q * 2 + 1;
            e -= 1;
        }
        Self::from_bigint_scaled(q, e, prec, mode)
    }

    /// Multiply by 2^k exactly.
    pub fn scale2(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        MpFloat { mant: self.mant.clone(), exp: self.exp + k, prec: self.prec }
    }

    pub fn sqrt(&self, mode: Round) -> Self {
        assert!(!self.is_negative(), "sqrt of negative value");
        if self.is_zero() {
            return self.clone();
        }
        let prec = self.prec;
        let extra = 2 * (prec as i64 + 4);
        let mut e = self.exp - extra;
        let mut shift = extra;
        if (self.exp - shift) % 2 != 0 {
            shift += 1;
            e = self.exp - shift;
        }
        let m = self.mant.clone() << shift as u32;
        let root = m.magnitude().sqrt();
        let exact = (&root * &root) == *m.magnitude();
        let mut q = BigInt::from(root);
        let mut e_out = e / 2;
        if !exact {
            q = (q << 1) | BigInt::one();
            e_out = e / 2;
            // shifting mantissa by 1 bit: exponent in half-steps handled via scaled exp
            return Self::from_bigint_scaled(q, e_out - 1, prec, mode);
        }
        Self::from_bigint_scaled(q, e_out, prec, mode)
    }

    /// Exact comparison of values.
    pub fn cmp_val(&self, other: &Self) -> Ordering {
        let sa = self.mant.sign();
        let sb = other.mant.sign();
        match (sa, sb) {
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            (Sign::NoSign, Sign::Plus) => return Ordering::Less,
            (Sign::NoSign, Sign::Minus) => return Ordering::Greater,
            (Sign::Plus, Sign::NoSign) => return Ordering::Greater,
            (Sign::Minus, Sign::NoSign) => return Ordering::Less,
            (Sign::Plus, Sign::Minus) => return Ordering::Greater,
            (Sign::Minus, Sign::Plus) => return Ordering::Less,
            _ => {}
        }
        // same nonzero sign: compare magnitudes via top-bit positions first
        let ta = self.exp as i128 + bit_len(&self.mant) as i128;
        let tb = other.exp as i128 + bit_len(&other.mant) as i128;
        let positive = sa == Sign::Plus;
        if ta != tb {
            let mag = if ta > tb { Ordering::Greater } else { Ordering::Less };
            return if positive { mag } else { mag.reverse() };
        }
        // align exactly (top positions equal, so shift is bounded by mantissa widths)
        let (ma, mb) = if self.exp >= other.exp {
            (self.mant.clone() << (self.exp - other.exp) as u32, other.mant.clone())
        } else {
            (self.mant.clone(), other.mant.clone() << (other.exp - self.exp) as u32)
        };
        ma.cmp(&mb)
    }

    /// log2 of |x| as (integer part estimate in i64, f64 refinement).
    pub fn log2_f64(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = bit_len(&self.mant) as i64;
        let top = self.exp + bits;
        // take the top 52 bits of the mantissa for the fractional part
        let mag = self.mant.magnitude();
        let take = 52u64.min(bits as u64 - 1);
        let head = (mag >> (bits as u64 - 1 - take)).to_u64().unwrap_or(1);
        let frac = (head as f64).log2() - take as f64;
        (top - 1) as f64 + frac
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = bit_len(&self.mant) as i64;
        let take = 53i64.min(bits);
        let head = (self.mant.magnitude() >> (bits - take) as u32).to_u64().unwrap_or(0) as f64;
        let e = self.exp + (bits - take);
        let sign = if self.mant.is_negative() { -1.0 } else { 1.0 };
        if e > 1020 {
            return sign * f64::INFINITY;
        }
        sign * head * pow2_f64(e)
    }

    /// Nudge one ulp up (for one-sided bounds after nearest-rounded composites).
    pub fn bump_up(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self::from_bigint_scaled(self.mant.clone() + 1, self.exp, self.prec, Round::Ceil)
    }

    /// Integer power with directed rounding.
    pub fn powi(&self, mut n: u64, mode: Round) -> Self {
        let mut base = self.clone();
        let mut acc = MpFloat::one(self.prec);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base, mode);
            }
            base = base.mul(&base, mode);
            n >>= 1;
        }
        acc
    }

    /// Hex round-trip format: `[-]0x<hexmant>p<exp>`.
    pub fn to_hex(&self) -> String {
        if self.is_zero() {
            return "0x0p0".to_string();
        }
        let sign = if self.mant.is_negative() { "-" } else { "" };
        format!("{}0x{}p{}", sign, self.mant.magnitude().to_str_radix(16), self.exp)
    }

    pub fn from_hex(s: &str, prec: u32) -> Option<Self> {
        let (neg, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let rest = rest.strip_prefix("0x")?;
        let pidx = rest.find('p')?;
        let mant = BigUint::parse_bytes(rest[..pidx].as_bytes(), 16)?;
        let exp: i64 = rest[pidx + 1..].parse().ok()?;
        let m = if neg { -BigInt::from(mant) } else { BigInt::from(mant) };
        Some(Self::from_bigint_scaled(m, exp, prec, Round::Nearest))
    }

    /// Deterministic scientific rendering; falls back to a log2 form when the
    /// exponent is outside the f64 range.
    pub fn to_display(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let l2 = self.log2_f64();
        if l2.abs() > 900.0 {
            return format!("2^{:.2}", l2);
        }
        format!("{:.12e}", self.to_f64())
    }
}

fn pow2_f64(e: i64) -> f64 {
    if e >= 1024 {
        f64::INFINITY
    } else if e <= -1075 {
        0.0
    } else {
        (e as f64).exp2()
    }
}

impl fmt::Display for MpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_display())
    }
}

// ---------------------------------------------------------------------------
// Transcendentals. All series run with guard bits and return nearest-rounded
// results accurate to a few ulps at the *requested* precision.
// ---------------------------------------------------------------------------

/// atan(1/x) for integer x >= 2, scaled: returns floor(2^p * atan(1/x)) within 2 ulps.
fn atan_inv_scaled(x: u64, p: u64) -> BigInt {
    let xx = BigInt::from(x) * BigInt::from(x);
    let mut term = (BigInt::one() << p) / BigInt::from(x);
    let mut sum = term.clone();
    let mut k = 1u64;
    while !term.is_zero() {
        term = &term / &xx;
        if term.is_zero() {
            break;
        }
        let denom = BigInt::from(2 * k + 1);
        let contrib = &term / &denom;
        if k % 2 == 1 {
            sum -= &contrib;
        } else {
            sum += &contrib;
        }
        k += 1;
    }
    sum
}

/// pi to `prec` bits (Machin's formula).
pub fn pi(prec: u32) -> MpFloat {
    let p = prec as u64 + 32;
    let a = atan_inv_scaled(5, p);
    let b = atan_inv_scaled(239, p);
    let v = a * 16 - b * 4;
    MpFloat::from_bigint_scaled(v, -(p as i64), prec, Round::Nearest)
}

/// ln(2) to `prec` bits via 2*atanh(1/3).
pub fn ln2(prec: u32) -> MpFloat {
    let p = prec as u64 + 32;
    let nine = BigInt::from(9);
    let mut term = (BigInt::one() << p) / BigInt::from(3);
    let mut sum = term.clone();
    let mut k = 1u64;
    while !term.is_zero() {
        term = &term / &nine;
        if term.is_zero() {
            break;
        }
        sum += &term / BigInt::from(2 * k + 1);
        k += 1;
    }
    MpFloat::from_bigint_scaled(sum * 2, -(p as i64), prec, Round::Nearest)
}

/// e^x by argument reduction against ln2 and a Taylor tail.
pub fn exp(x: &MpFloat, prec: u32) -> MpFloat {
    let wp = prec + 64;
    let l2 = ln2(wp);
    let x = MpFloat::from_bigint_scaled(x.mant.clone(), x.exp, wp, Round::Nearest);
    // n = round(x / ln2)
    let q = x.div(&l2, Round::Nearest);
    let n = round_to_i64(&q);
    let r = x.sub(&MpFloat::from_i64(n, wp).mul(&l2, Round::Nearest), Round::Nearest);
    // |r| <= ln2/2 + eps; Taylor sum
    let mut term = MpFloat::one(wp);
    let mut sum = MpFloat::one(wp);
    let mut k: i64 = 1;
    loop {
        term = term.mul(&r, Round::Nearest).div(&MpFloat::from_i64(k, wp), Round::Nearest);
        if term.is_zero() || term.log2_f64() < -((wp as f64) + 8.0) {
            break;
        }
        sum = sum.add(&term, Round::Nearest);
        k += 1;
        if k > 4 * wp as i64 {
            break;
        }
    }
    MpFloat::from_bigint_scaled(sum.mant.clone(), sum.exp + n, prec, Round::Nearest)
}

/// Natural log; x > 0.
pub fn ln(x: &MpFloat, prec: u32) -> MpFloat {
    assert!(!x.is_negative() && !x.is_zero(), "ln domain");
    let wp = prec + 64;
    // write x = m * 2^e with m in [1, 2)
    let bits = bit_len(&x.mant) as i64;
    let e = x.exp + bits - 1;
    let m = MpFloat::from_bigint_scaled(x.mant.clone(), -(bits - 1), wp, Round::Nearest);
    // ln m = 2 atanh(u), u = (m-1)/(m+1) in [0, 1/3)
    let one = MpFloat::one(wp);
    let u = m.sub(&one, Round::Nearest).div(&m.add(&one, Round::Nearest), Round::Nearest);
    let uu = u.mul(&u, Round::Nearest);
    let mut term = u.clone();
    let mut sum = u.clone();
    let mut k = 1i64;
    loop {
        term = term.mul(&uu, Round::Nearest);
        let contrib = term.div(&MpFloat::from_i64(2 * k + 1, wp), Round::Nearest);
        if contrib.is_zero() || contrib.log2_f64() < -((wp as f64) + 8.0) {
            break;
        }
        sum = sum.add(&contrib, Round::Nearest);
        k += 1;
        if k > 4 * wp as i64 {
            break;
        }
    }
    let lnm = sum.scale2(1);
    let l2 = ln2(wp);
    let out = lnm.add(&MpFloat::from_i64(e, wp).mul(&l2, Round::Nearest), Round::Nearest);
    MpFloat::from_bigint_scaled(out.mant.clone(), out.exp, prec, Round::Nearest)
}

/// 2^x for an arbitrary-precision exponent.
pub fn pow2(x: &MpFloat, prec: u32) -> MpFloat {
    let wp = prec + 64;
    let l2 = ln2(wp);
    let arg = MpFloat::from_bigint_scaled(x.mant.clone(), x.exp, wp, Round::Nearest)
        .mul(&l2, Round::Nearest);
    exp(&arg, prec)
}

fn round_to_i64(x: &MpFloat) -> i64 {
    if x.is_zero() {
        return 0;
    }
    let r = x.to_ratio();
    let two = BigInt::from(2);
    let num2 = r.numer() * &two + r.denom() * BigInt::from(if r.numer().is_negative() { -1 } else { 1 });
    let q = num2 / (r.denom() * &two);
    q.to_i64().expect("exponent reduction out of range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: f64, p: u32) -> MpFloat {
        MpFloat::from_ratio(&BigRational::from_float(v).unwrap(), p, Round::Nearest)
    }

    #[test]
    fn add_mul_roundtrip_small() {
        let a = f(1.5, 128);
        let b = f(2.25, 128);
        assert_eq!(a.add(&b, Round::Nearest).to_f64(), 3.75);
        assert_eq!(a.mul(&b, Round::Nearest).to_f64(), 3.375);
        assert_eq!(a.sub(&b, Round::Nearest).to_f64(), -0.75);
    }

    #[test]
    fn div_exact_and_inexact() {
        let a = f(1.0, 128);
        let b = f(3.0, 128);
        let q = a.div(&b, Round::Nearest);
        let back = q.mul(&b, Round::Nearest);
        assert!((back.to_f64() - 1.0).abs() < 1e-30);
        let down = a.div(&b, Round::Floor);
        let up = a.div(&b, Round::Ceil);
        assert!(down.cmp_val(&up) == Ordering::Less);
        assert!(down.cmp_val(&q) != Ordering::Greater);
    }

    #[test]
    fn sqrt_squares() {
        let a = MpFloat::from_i64(144, 160);
        assert_eq!(a.sqrt(Round::Nearest).to_f64(), 12.0);
        let b = MpFloat::from_i64(2, 160);
        let r = b.sqrt(Round::Nearest);
        assert!((r.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        let lo = b.sqrt(Round::Floor);
        let hi = b.sqrt(Round::Ceil);
        assert!(lo.mul(&lo, Round::Floor).cmp_val(&b) == Ordering::Less);
        assert!(hi.mul(&hi, Round::Ceil).cmp_val(&b) == Ordering::Greater);
    }

    #[test]
    fn pi_two_formulas_agree() {
        // Machin vs pi/4 = 2 atan(1/3) + atan(1/7): independent routes must agree
        let prec = 320u32;
        let p = prec as u64 + 32;
        let machin = pi(prec);
        let alt = {
            let a = atan_inv_scaled(3, p);
            let b = atan_inv_scaled(7, p);
            MpFloat::from_bigint_scaled(a * 8 + b * 4, -(p as i64), prec, Round::Nearest)
        };
        let diff = machin.sub(&alt, Round::Nearest).abs();
        assert!(diff.is_zero() || diff.log2_f64() < -(prec as f64) + 8.0);
        assert!((machin.to_f64() - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn exp_ln_inverse() {
        let prec = 256u32;
        for v in [0.5f64, 1.0, 2.7, 10.0, 0.001] {
            let x = f(v, prec);
            let e = exp(&x, prec);
            let back = ln(&e, prec);
            let diff = back.sub(&x, Round::Nearest).abs();
            assert!(
                diff.is_zero() || diff.log2_f64() < -(prec as f64) + 24.0,
                "v={} diff=2^{}",
                v,
                diff.log2_f64()
            );
        }
    }

    #[test]
    fn pow2_integer_cases() {
        let prec = 192u32;
        let x = MpFloat::from_i64(10, prec);
        let y = pow2(&x, prec);
        assert_eq!(y.to_f64(), 1024.0);
        let x = f(0.5, prec);
        let y = pow2(&x, prec);
        assert!((y.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn hex_roundtrip() {
        let x = f(-1234.56789, 200);
        let s = x.to_hex();
        let y = MpFloat::from_hex(&s, 200).unwrap();
        assert_eq!(x.cmp_val(&y), Ordering::Equal);
    }

    #[test]
    fn huge_exponent_log2() {
        let x = MpFloat::from_bigint_scaled(BigInt::from(3), -1_000_000, 128, Round::Nearest);
        let l = x.log2_f64();
        assert!((l - (-1_000_000.0 + 1.585)).abs() < 0.01);
    }

    #[test]
    fn add_with_huge_gap_is_directional() {
        let prec = 128;
        let big = MpFloat::from_i64(1, prec);
        let tiny = MpFloat::from_bigint_scaled(BigInt::from(1), -100_000, prec, Round::Nearest);
        let up = big.add(&tiny, Round::Ceil);
        let down = big.add(&tiny, Round::Floor);
        assert!(up.cmp_val(&big) == Ordering::Greater);
        assert!(down.cmp_val(&big) != Ordering::Greater);
    }
}
