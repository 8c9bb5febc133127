//! The two-basis atlas: which ambient basis vector each `f_j` is, the lay-off
//! weights, and the triangular change of basis between the `e`- and
//! `f`-coordinates.
//!
//! `e_j` expansions are memoized below a bounded horizon and recomputed on the
//! fly above it, so orbit scans over millions of indices stay in bounded
//! memory.

use crate::scalar::{pow2, MpFloat, Round, Scalar};
use crate::schedule::{IntervalKind, IntervalTag, Schedule, Space, Variant, ZSpace};
use crate::{Error, Idx, Result};
use num_bigint::BigInt;
use num_traits::One;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

/// Identity of `f_j` inside the ambient direct sum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FIdentity {
    /// `g_i`: canonical basis of the l_p / c_0 summand.
    G(Idx),
    /// `z_r` in the single extra summand (single-block layout).
    Z(Idx),
    /// `z_r` in copy `d` (multi-block layout).
    ZCopy { d: Idx, r: Idx },
}

/// Finitely supported coefficient vector, sorted support, no stored zeros.
#[derive(Clone, Debug, Default)]
pub struct FVector {
    entries: Vec<(Idx, Scalar)>,
}

impl FVector {
    pub fn new() -> Self {
        FVector { entries: Vec::new() }
    }

    pub fn unit(j: Idx) -> Self {
        FVector { entries: vec![(j, Scalar::one())] }
    }

    pub fn single(j: Idx, c: Scalar) -> Self {
        if c.is_zero() {
            FVector::new()
        } else {
            FVector { entries: vec![(j, c)] }
        }
    }

    pub fn from_entries(mut entries: Vec<(Idx, Scalar)>, prec: u32) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(Idx, Scalar)> = Vec::with_capacity(entries.len());
        for (j, c) in entries {
            match out.last_mut() {
                Some((last, acc)) if *last == j => {
                    *acc = acc.add(&c, prec, Round::Nearest);
                }
                _ => out.push((j, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        FVector { entries: out }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Idx, Scalar)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = Idx> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn max_index(&self) -> Option<Idx> {
        self.entries.last().map(|e| e.0)
    }

    pub fn min_index(&self) -> Option<Idx> {
        self.entries.first().map(|e| e.0)
    }

    pub fn get(&self, j: Idx) -> Scalar {
        match self.entries.binary_search_by_key(&j, |e| e.0) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => Scalar::zero(),
        }
    }

    pub fn scale(&self, c: &Scalar, prec: u32) -> Self {
        if c.is_zero() {
            return FVector::new();
        }
        FVector {
            entries: self
                .entries
                .iter()
                .map(|(j, v)| (*j, v.mul(c, prec, Round::Nearest)))
                .collect(),
        }
    }

    /// `self + coeff * other`, merged in one pass.
    pub fn add_scaled(&self, other: &Self, coeff: &Scalar, prec: u32) -> Self {
        if coeff.is_zero() || other.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut k) = (0usize, 0usize);
        while i < self.entries.len() || k < other.entries.len() {
            let take_left = match (self.entries.get(i), other.entries.get(k)) {
                (Some(a), Some(b)) => {
                    if a.0 == b.0 {
                        let v = a.1.add(&b.1.mul(coeff, prec, Round::Nearest), prec, Round::Nearest);
                        if !v.is_zero() {
                            out.push((a.0, v));
                        }
                        i += 1;
                        k += 1;
                        continue;
                    }
                    a.0 < b.0
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_left {
                out.push(self.entries[i].clone());
                i += 1;
            } else {
                let (j, v) = &other.entries[k];
                let v = v.mul(coeff, prec, Round::Nearest);
                if !v.is_zero() {
                    out.push((*j, v));
                }
                k += 1;
            }
        }
        FVector { entries: out }
    }

    pub fn add(&self, other: &Self, prec: u32) -> Self {
        self.add_scaled(other, &Scalar::one(), prec)
    }

    pub fn sub(&self, other: &Self, prec: u32) -> Self {
        self.add_scaled(other, &Scalar::from_int(-1), prec)
    }

    /// Shift every index by `delta` (exact).
    pub fn shift(&self, delta: Idx) -> Self {
        FVector {
            entries: self.entries.iter().map(|(j, c)| (j + delta, c.clone())).collect(),
        }
    }

    /// Restrict to indices in `[lo, hi]`.
    pub fn window(&self, lo: Idx, hi: Idx) -> Self {
        FVector {
            entries: self
                .entries
                .iter()
                .filter(|(j, _)| *j >= lo && *j <= hi)
                .cloned()
                .collect(),
        }
    }

    pub fn all_rational(&self) -> bool {
        self.entries.iter().all(|(_, c)| c.is_exact())
    }
}

/// The lay-off weight exponent: `log2 lambda_j = num / (2 sqrt(scale_sq))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LambdaExp {
    pub num: i128,
    pub scale_sq: Idx,
}

/// Atlas over a frozen (or partially frozen) schedule.
pub struct Atlas<'a> {
    pub sched: &'a Schedule,
    memo: RefCell<BTreeMap<Idx, Rc<FVector>>>,
    memo_limit: Idx,
}

impl<'a> Atlas<'a> {
    pub fn new(sched: &'a Schedule) -> Self {
        // cache the dense recursion region: everything a single lattice level
        // reaches back into
        let last_real = sched.n_built();
        let limit = sched
            .step(last_real)
            .map(|s| s.nu.saturating_add(2 * s.degree_cap).saturating_add(64))
            .unwrap_or(0);
        Atlas { sched, memo: RefCell::new(BTreeMap::new()), memo_limit: limit }
    }

    pub fn prec(&self) -> u32 {
        self.sched.precision()
    }

    /// Which ambient basis vector `f_j` is.
    pub fn f_identity(&self, j: Idx) -> Result<FIdentity> {
        if j == 0 {
            return Ok(FIdentity::G(0));
        }
        let tag = self.sched.classify_index(j)?;
        match tag.kind {
            IntervalKind::AWork { n, r, offset } => match self.sched.params.variant {
                Variant::Th2 => {
                    let k = self.sched.step(n)?.a - j;
                    Ok(FIdentity::Z(self.sched.kappa(n as Idx) - k))
                }
                Variant::Th1 => {
                    let d_base = self.sched.step(n + 1 - r as u32)?.d;
                    Ok(FIdentity::ZCopy { d: d_base + offset, r })
                }
            },
            _ => Ok(FIdentity::G(self.sched.sigma(j)?)),
        }
    }

    /// Norm of the coordinate functional `f_j^*`; 1 for both built-in summands.
    pub fn dual_norm(&self, j: Idx) -> Result<Scalar> {
        if j > 0 {
            self.sched.classify_index(j)?;
        }
        Ok(Scalar::one())
    }

    /// Lay-off weight exponent at `j`. Errors unless `j` is in a lay-off.
    pub fn lambda_exp(&self, j: Idx) -> Result<LambdaExp> {
        let tag = self.sched.classify_index(j)?;
        let (k, _l, modified) = match tag.kind {
            IntervalKind::LayOff { k, l, modified } => (k, l, modified),
            _ => return Err(Error::NotLayOff(j)),
        };
        let scale_sq = if modified { self.sched.step(tag.step)?.b } else { tag.hi - tag.lo + 1 };
        let offset = (j - (k + 1)) as i128; // in [0, actual length)
        let num = scale_sq as i128 - 2 * offset;
        Ok(LambdaExp { num, scale_sq })
    }

    /// Materialized lay-off weight; exactly dyadic whenever the exponent is
    /// an integer (always possible in modified lay-offs, whose scale has an
    /// integer square root by construction).
    pub fn lambda(&self, j: Idx) -> Result<Scalar> {
        let e = self.lambda_exp(j)?;
        Ok(self.pow2_of_exp(&e))
    }

    pub fn pow2_of_exp(&self, e: &LambdaExp) -> Scalar {
        let s = crate::schedule::isqrt(e.scale_sq);
        if s * s == e.scale_sq {
            let den = 2 * s as i128;
            if e.num % den == 0 {
                let k = e.num / den;
                if k.unsigned_abs() <= 1 << 20 {
                    return Scalar::pow2_int(k as i64);
                }
                return Scalar::F(MpFloat::one(self.prec()).scale2(k as i64));
            }
        }
        let prec = self.prec() + 32;
        let num = MpFloat::from_bigint(BigInt::from(e.num), prec);
        let den = MpFloat::from_u128(e.scale_sq, prec)
            .sqrt(Round::Nearest)
            .scale2(1);
        let q = num.div(&den, Round::Nearest);
        Scalar::F(pow2(&q, self.prec()))
    }

    fn alpha_step(&self, n: u32) -> Scalar {
        self.sched.alpha(n as Idx)
    }

    pub fn gamma(&self, n: u32) -> Result<Scalar> {
        let g = self.sched.step(n)?.gamma_log2;
        if g.unsigned_abs() <= 512 {
            Ok(Scalar::pow2_int(g))
        } else {
            Ok(Scalar::F(MpFloat::one(self.prec()).scale2(g)))
        }
    }

    /// Dependencies of `e_j` (the strictly smaller e-indices in its rule).
    fn e_deps(&self, j: Idx, tag: &IntervalTag) -> Result<Vec<Idx>> {
        Ok(match &tag.kind {
            IntervalKind::LayOff { .. } => vec![],
            IntervalKind::AWork { n, r, offset } => match self.sched.params.variant {
                Variant::Th2 => {
                    let s = self.sched.step(*n)?;
                    if j < s.a {
                        vec![]
                    } else if *n == 1 {
                        vec![0]
                    } else {
                        vec![self.sched.step(n - 1)?.a]
                    }
                }
                Variant::Th1 => {
                    let prev_a = if *n >= 2 { self.sched.step(n - 1)?.a } else { 1 };
                    vec![offset + (*r - 1) * prev_a] // j - r a_n + (r-1) a_{n-1}
                }
            },
            IntervalKind::BWork { n, .. } => vec![j - self.sched.step(*n)?.b],
            IntervalKind::CWork { n, t, .. } => {
                let step = self.sched.step(*n)?;
                let net = self.sched.net(*n)?;
                let p = &net[(*t - 1) as usize];
                let base = j - step.c[(*t - 1) as usize];
                p.terms().iter().map(|(i, _)| base + i).collect()
            }
        })
    }

    fn e_value(
        &self,
        j: Idx,
        tag: &IntervalTag,
        fetch: &dyn Fn(Idx) -> Rc<FVector>,
    ) -> Result<FVector> {
        let prec = self.prec();
        Ok(match &tag.kind {
            IntervalKind::LayOff { .. } => {
                let lam = self.lambda(j)?;
                FVector::single(j, Scalar::one().div(&lam, prec, Round::Nearest))
            }
            IntervalKind::AWork { n, r, offset } => match self.sched.params.variant {
                Variant::Th2 => {
                    let s = self.sched.step(*n)?;
                    if j < s.a {
                        // e_{a-k} = a^{k+1} f_{a-k}
                        let k = (s.a - j) as u32;
                        let pow = BigInt::from(s.a).pow(k + 1);
                        FVector::single(j, Scalar::Q(num_rational::BigRational::from(pow)))
                    } else {
                        let dep = if *n == 1 { 0 } else { self.sched.step(n - 1)?.a };
                        FVector::single(j, self.alpha_step(*n)).add(&fetch(dep), prec)
                    }
                }
                Variant::Th1 => {
                    let prev_a = if *n >= 2 { self.sched.step(n - 1)?.a } else { 1 };
                    let dep = offset + (*r - 1) * prev_a;
                    let denom = if *r == *n as Idx { 1 } else { self.sched.step(*n - *r as u32)?.a };
                    let coeff = self
                        .sched
                        .alpha(*r)
                        .div(&Scalar::from_u128(denom), prec, Round::Nearest);
                    FVector::single(j, coeff).add(&fetch(dep), prec)
                }
            },
            IntervalKind::BWork { n, .. } => {
                let s = self.sched.step(*n)?;
                FVector::unit(j).add_scaled(&fetch(j - s.b), &Scalar::from_u128(s.b), prec)
            }
            IntervalKind::CWork { n, s: svec, t } => {
                let step = self.sched.step(*n)?;
                let net = self.sched.net(*n)?;
                let p = &net[(*t - 1) as usize];
                let base = j - step.c[(*t - 1) as usize];
                let total: u64 = svec.iter().map(|&x| x as u64).sum();
                let four = Scalar::from_int(4);
                let head = self.gamma(*n)?.mul(&four.powu(total - 1, prec), prec, Round::Nearest);
                let mut acc = FVector::single(j, head);
                for (i, coeff) in p.terms() {
                    acc = acc.add_scaled(&fetch(base + i), coeff, prec);
                }
                acc
            }
        })
    }

    /// Expand `e_j` in `f`-coordinates (memoized below the cache horizon).
    pub fn e_in_f(&self, j: Idx) -> Result<Rc<FVector>> {
        if j == 0 {
            return Ok(Rc::new(FVector::unit(0)));
        }
        if let Some(v) = self.memo.borrow().get(&j) {
            return Ok(v.clone());
        }
        // iterative DFS: (index, deps_pushed)
        let mut stack: Vec<(Idx, bool)> = vec![(j, false)];
        let mut scratch: BTreeMap<Idx, Rc<FVector>> = BTreeMap::new();
        while let Some((m, expanded)) = stack.pop() {
            if m == 0
                || scratch.contains_key(&m)
                || self.memo.borrow().contains_key(&m)
            {
                continue;
            }
            let tag = self.sched.classify_index(m)?;
            if !expanded {
                stack.push((m, true));
                for dep in self.e_deps(m, &tag)? {
                    if dep != 0
                        && !scratch.contains_key(&dep)
                        && !self.memo.borrow().contains_key(&dep)
                    {
                        stack.push((dep, false));
                    }
                }
                continue;
            }
            // all deps available; assemble
            let root = Rc::new(FVector::unit(0));
            let val = {
                let memo = self.memo.borrow();
                let fetch = |m: Idx| -> Rc<FVector> {
                    if m == 0 {
                        return root.clone();
                    }
                    scratch
                        .get(&m)
                        .cloned()
                        .or_else(|| memo.get(&m).cloned())
                        .expect("dependency must be resolved before its user")
                };
                Rc::new(self.e_value(m, &tag, &fetch)?)
            };
            if m <= self.memo_limit {
                self.memo.borrow_mut().insert(m, val.clone());
            }
            scratch.insert(m, val);
        }
        if let Some(v) = scratch.get(&j) {
            return Ok(v.clone());
        }
        Ok(self
            .memo
            .borrow()
            .get(&j)
            .cloned()
            .expect("expansion must have produced the target"))
    }

    /// Expand `f_j` in `e`-coordinates directly from the defining relations.
    pub fn f_in_e(&self, j: Idx) -> Result<FVector> {
        if j == 0 {
            return Ok(FVector::unit(0));
        }
        let prec = self.prec();
        let tag = self.sched.classify_index(j)?;
        Ok(match &tag.kind {
            IntervalKind::LayOff { .. } => FVector::single(j, self.lambda(j)?),
            IntervalKind::AWork { n, r, offset } => match self.sched.params.variant {
                Variant::Th2 => {
                    let s = self.sched.step(*n)?;
                    if j < s.a {
                        let k = (s.a - j) as u32;
                        let pow = BigInt::from(s.a).pow(k + 1);
                        FVector::single(
                            j,
                            Scalar::Q(num_rational::BigRational::new(BigInt::one(), pow)),
                        )
                    } else {
                        let inv = Scalar::one().div(&self.alpha_step(*n), prec, Round::Nearest);
                        let dep = if *n == 1 { 0 } else { self.sched.step(n - 1)?.a };
                        FVector::from_entries(vec![(j, inv.clone()), (dep, inv.neg())], prec)
                    }
                }
                Variant::Th1 => {
                    let prev_a = if *n >= 2 { self.sched.step(n - 1)?.a } else { 1 };
                    let dep = offset + (*r - 1) * prev_a;
                    let denom = if *r == *n as Idx { 1 } else { self.sched.step(*n - *r as u32)?.a };
                    let coeff = Scalar::from_u128(denom).div(&self.sched.alpha(*r), prec, Round::Nearest);
                    FVector::from_entries(vec![(j, coeff.clone()), (dep, coeff.neg())], prec)
                }
            },
            IntervalKind::BWork { n, .. } => {
                let s = self.sched.step(*n)?;
                FVector::from_entries(
                    vec![(j, Scalar::one()), (j - s.b, Scalar::from_u128(s.b).neg())],
                    prec,
                )
            }
            IntervalKind::CWork { n, s: svec, t } => {
                let step = self.sched.step(*n)?;
                let net = self.sched.net(*n)?;
                let p = &net[(*t - 1) as usize];
                let base = j - step.c[(*t - 1) as usize];
                let total: u64 = svec.iter().map(|&x| x as u64).sum();
                let four_pow = Scalar::from_int(4).powu(total - 1, prec);
                let scale = Scalar::one().div(
                    &self.gamma(*n)?.mul(&four_pow, prec, Round::Nearest),
                    prec,
                    Round::Nearest,
                );
                let mut entries = vec![(j, scale.clone())];
                for (i, coeff) in p.terms() {
                    entries.push((base + i, coeff.mul(&scale, prec, Round::Nearest).neg()));
                }
                FVector::from_entries(entries, prec)
            }
        })
    }

    /// Change a vector from `f`- to `e`-coordinates.
    pub fn to_e_coords(&self, x: &FVector) -> Result<FVector> {
        let prec = self.prec();
        let mut acc = FVector::new();
        for (j, c) in x.iter() {
            let fe = self.f_in_e(*j)?;
            acc = acc.add_scaled(&fe, c, prec);
        }
        Ok(acc)
    }

    /// Change a vector from `e`- to `f`-coordinates.
    pub fn from_e_coords(&self, xe: &FVector) -> Result<FVector> {
        let prec = self.prec();
        let mut acc = FVector::new();
        for (m, c) in xe.iter() {
            let ef = self.e_in_f(*m)?;
            acc = acc.add_scaled(&ef, c, prec);
        }
        Ok(acc)
    }

    /// Mixed norm of a finitely supported vector.
    pub fn norm(&self, x: &FVector) -> Result<Scalar> {
        let prec = self.prec();
        // split the coefficients into the shift summand and the z-groups
        let mut lp: Vec<Scalar> = Vec::new();
        let mut groups: BTreeMap<Idx, Vec<Scalar>> = BTreeMap::new();
        for (j, c) in x.iter() {
            if *j == 0 {
                lp.push(c.clone());
                continue;
            }
            let tag = self.sched.classify_index(*j)?;
            match tag.kind {
                IntervalKind::AWork { r, offset, .. } => match self.sched.params.variant {
                    Variant::Th2 => groups.entry(0).or_default().push(c.clone()),
                    Variant::Th1 => {
                        let d = self.sched.step(tag.step + 1 - r as u32)?.d + offset;
                        groups.entry(d).or_default().push(c.clone());
                    }
                },
                _ => lp.push(c.clone()),
            }
        }
        let z_norm = |coeffs: &[Scalar]| -> Scalar {
            match self.sched.params.z_space {
                ZSpace::C0Canonical => sup_abs(coeffs),
                ZSpace::L2SecondCopy => l2_norm(coeffs, prec),
            }
        };
        match &self.sched.params.space {
            Space::C0 => {
                let mut m = sup_abs(&lp);
                for g in groups.values() {
                    let zn = z_norm(g);
                    if zn.cmp_val(&m) == std::cmp::Ordering::Greater {
                        m = zn;
                    }
                }
                Ok(m)
            }
            Space::Lp(p) => {
                if p.is_one() {
                    let mut acc = Scalar::zero();
                    for c in &lp {
                        acc = acc.add(&c.abs(), prec, Round::Nearest);
                    }
                    for g in groups.values() {
                        acc = acc.add(&z_norm(g), prec, Round::Nearest);
                    }
                    Ok(acc)
                } else if *p == num_rational::BigRational::from_integer(2.into()) {
                    let mut acc = Scalar::zero();
                    for c in &lp {
                        acc = acc.add(&c.mul(c, prec, Round::Nearest), prec, Round::Nearest);
                    }
                    for g in groups.values() {
                        let zn = z_norm(g);
                        acc = acc.add(&zn.mul(&zn, prec, Round::Nearest), prec, Round::Nearest);
                    }
                    Ok(sqrt_scalar(&acc, prec))
                } else {
                    // general p: float powers throughout
                    let pf = Scalar::Q(p.clone()).to_float(prec, Round::Nearest);
                    let mut acc = MpFloat::zero(prec);
                    let add_pow = |acc: &mut MpFloat, v: &Scalar| {
                        if v.is_zero() {
                            return;
                        }
                        let a = v.abs().to_float(prec, Round::Nearest);
                        let t = crate::scalar::exp(
                            &crate::scalar::ln(&a, prec).mul(&pf, Round::Nearest),
                            prec,
                        );
                        *acc = acc.add(&t, Round::Nearest);
                    };
                    for c in &lp {
                        add_pow(&mut acc, c);
                    }
                    for g in groups.values() {
                        add_pow(&mut acc, &z_norm(g));
                    }
                    if acc.is_zero() {
                        return Ok(Scalar::zero());
                    }
                    let inv_p = MpFloat::one(prec).div(&pf, Round::Nearest);
                    Ok(Scalar::F(crate::scalar::exp(
                        &crate::scalar::ln(&acc, prec).mul(&inv_p, Round::Nearest),
                        prec,
                    )))
                }
            }
        }
    }

    /// Norm of `e_j` (no caching; callers hold on to it if they need it again).
    pub fn e_norm(&self, j: Idx) -> Result<Scalar> {
        let e = self.e_in_f(j)?;
        self.norm(&e)
    }
}

fn sup_abs(coeffs: &[Scalar]) -> Scalar {
    let mut m = Scalar::zero();
    for c in coeffs {
        let a = c.abs();
        if a.cmp_val(&m) == std::cmp::Ordering::Greater {
            m = a;
        }
    }
    m
}

fn l2_norm(coeffs: &[Scalar], prec: u32) -> Scalar {
    let mut acc = Scalar::zero();
    for c in coeffs {
        acc = acc.add(&c.mul(c, prec, Round::Nearest), prec, Round::Nearest);
    }
    sqrt_scalar(&acc, prec)
}

pub fn sqrt_scalar(v: &Scalar, prec: u32) -> Scalar {
    match v {
        Scalar::Q(q) => {
            // exact when both parts are perfect squares
            let ns = q.numer().sqrt();
            let ds = q.denom().sqrt();
            if &(&ns * &ns) == q.numer() && &(&ds * &ds) == q.denom() {
                return Scalar::Q(num_rational::BigRational::new(ns, ds));
            }
            Scalar::F(v.to_float(prec, Round::Nearest).sqrt(Round::Nearest))
        }
        Scalar::F(f) => Scalar::F(f.sqrt(Round::Nearest)),
    }
}

impl Scalar {
    /// Non-negative integer power.
    pub fn powu(&self, mut n: u64, prec: u32) -> Scalar {
        let mut base = self.clone();
        let mut acc = Scalar::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base, prec, Round::Nearest);
            }
            base = base.mul(&base, prec, Round::Nearest);
            n >>= 1;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ScheduleParams;
    use std::cmp::Ordering;

    fn desk() -> Schedule {
        Schedule::build(ScheduleParams::desk()).unwrap()
    }

    #[test]
    fn identities_on_desk() {
        let s = desk();
        let at = Atlas::new(&s);
        assert_eq!(at.f_identity(0).unwrap(), FIdentity::G(0));
        assert_eq!(at.f_identity(16).unwrap(), FIdentity::Z(1));
        assert_eq!(at.f_identity(17).unwrap(), FIdentity::G(16));
        assert_eq!(at.f_identity(3).unwrap(), FIdentity::G(3));
    }

    #[test]
    fn lambda_values_on_initial_layoff() {
        let s = desk();
        let at = Atlas::new(&s);
        // [1,15]: log2 lambda_1 = 7.5/sqrt(15)
        let e = at.lambda_exp(1).unwrap();
        assert_eq!(e, LambdaExp { num: 15, scale_sq: 15 });
        let l = at.lambda(1).unwrap();
        assert!((l.to_f64().log2() - 7.5 / 15f64.sqrt()).abs() < 1e-12);
        let e15 = at.lambda_exp(15).unwrap();
        assert_eq!(e15.num, 15 - 2 * 14);
        // consecutive ratio is exactly 1/sqrt(l) in log2
        let e2 = at.lambda_exp(2).unwrap();
        assert_eq!(e.num - e2.num, 2);
        assert_eq!(e.scale_sq, e2.scale_sq);
        // modified lay-off at a+1 has the dyadic weight 2^(sqrt(b)/2)
        let m = at.lambda(17).unwrap();
        assert!(m.is_exact());
        assert_eq!(m.cmp_val(&Scalar::from_int(256)), Ordering::Equal);
    }

    #[test]
    fn e_expansion_examples() {
        let s = desk();
        let at = Atlas::new(&s);
        // e_{a_1} = (1/4) f_16 + f_0, exact
        let e = at.e_in_f(16).unwrap();
        assert!(e.all_rational());
        assert_eq!(e.get(16).cmp_val(&Scalar::ratio(1, 4)), Ordering::Equal);
        assert_eq!(e.get(0).cmp_val(&Scalar::one()), Ordering::Equal);
        assert_eq!(e.nnz(), 2);
        // e_257 = f_257 + 256 e_1 with e_1 = f_1 / lambda_1
        let e = at.e_in_f(257).unwrap();
        assert_eq!(e.nnz(), 2);
        assert_eq!(e.get(257).cmp_val(&Scalar::one()), Ordering::Equal);
        let lam1 = at.lambda(1).unwrap();
        let expect = Scalar::from_int(256).div(&lam1, at.prec(), Round::Nearest);
        let diff = e.get(1).sub(&expect, at.prec(), Round::Nearest).abs();
        assert!(diff.is_zero() || diff.log2_f64() < -200.0);
    }

    #[test]
    fn norm_examples() {
        let s = desk();
        let at = Atlas::new(&s);
        assert_eq!(at.norm(&FVector::unit(0)).unwrap().cmp_val(&Scalar::one()), Ordering::Equal);
        // ||e_{a_1}|| = 1 + 1/4 in the l1-with-c0 mixed norm, exactly
        let e = at.e_in_f(16).unwrap();
        let n = at.norm(&e).unwrap();
        assert!(n.is_exact());
        assert_eq!(n.cmp_val(&Scalar::ratio(5, 4)), Ordering::Equal);
        // ||e_{a_n} - e_0|| = 1/4 exactly
        let d = e.sub(&FVector::unit(0), at.prec());
        assert_eq!(at.norm(&d).unwrap().cmp_val(&Scalar::ratio(1, 4)), Ordering::Equal);
    }

    #[test]
    fn roundtrip_f_e_coordinates() {
        let s = desk();
        let at = Atlas::new(&s);
        let x = FVector::from_entries(
            vec![
                (0, Scalar::ratio(2, 3)),
                (5, Scalar::from_int(-3)),
                (16, Scalar::one()),
                (300, Scalar::ratio(1, 7)),
            ],
            at.prec(),
        );
        let xe = at.to_e_coords(&x).unwrap();
        let back = at.from_e_coords(&xe).unwrap();
        let diff = back.sub(&x, at.prec());
        let n = at.norm(&diff).unwrap();
        assert!(n.is_zero() || n.log2_f64() < -200.0, "residual 2^{}", n.log2_f64());
    }

    #[test]
    fn triangularity() {
        let s = desk();
        let at = Atlas::new(&s);
        for j in [1u128, 15, 16, 17, 257, 258, 4112, 16448, 16500] {
            let e = at.e_in_f(j).unwrap();
            assert_eq!(e.max_index(), Some(j), "top index of e_{}", j);
            assert!(!e.get(j).is_zero());
            let f = at.f_in_e(j).unwrap();
            assert_eq!(f.max_index(), Some(j));
            assert!(!f.get(j).is_zero());
        }
    }

    #[test]
    fn multi_build_identity_exact() {
        // e_{(n-N) a_n} = (1/a_N) sum alpha_k z_k^{(d_{N+1})} + e_0, exact
        let mut p = ScheduleParams::desk();
        p.variant = Variant::Th1;
        p.alpha = crate::schedule::AlphaSpec::Constant(num_rational::BigRational::one());
        let s = crate::schedule::build_schedule_multi(p).unwrap();
        let at = Atlas::new(&s);
        let s2 = s.step(2).unwrap();
        // n = 2, N = 1: e_{a_2} = (1/a_1) alpha_1 z_1^{(d_2)} + e_0
        let e = at.e_in_f(s2.a).unwrap();
        assert!(e.all_rational());
        assert_eq!(e.get(0).cmp_val(&Scalar::one()), Ordering::Equal);
        let coeff = e.get(s2.a);
        let a1 = s.step(1).unwrap().a;
        assert_eq!(coeff.cmp_val(&Scalar::ratio(1, a1 as i128)), Ordering::Equal);
        assert_eq!(at.f_identity(s2.a).unwrap(), FIdentity::ZCopy { d: 2, r: 1 });
        // norm: ||e_{a_2} - e_0|| <= 1/a_1 (equality for constant alpha = 1)
        let d = e.sub(&FVector::unit(0), at.prec());
        let n = at.norm(&d).unwrap();
        assert_eq!(n.cmp_val(&Scalar::ratio(1, a1 as i128)), Ordering::Equal);
    }
}
