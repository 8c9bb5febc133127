//! The multi-block construction (several insertion blocks per step, one copy
//! of the extra summand per block offset) and the Hilbert-space instance
//! (both summands l2, harmonic insertion coefficients).

use crate::basis::{Atlas, FIdentity, FVector};
use crate::operator::{column_tf, power_apply};
use crate::report::CertReport;
use crate::scalar::{MpFloat, Round, Scalar};
use crate::schedule::{
    build_schedule_multi, AlphaSpec, Schedule, ScheduleParams, Space, Variant, ZSpace,
};
use crate::verify::{find_large_coordinate, PipelinePlan, VerificationConstants};
use crate::{Error, Idx, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

/// The copy layout of the multi-block build: `d_1 = 1`,
/// `d_{n+1} = d_n + xi_n + 1`, and `z_r^{(d)} = f_{r a_{m+r-1} + d - d_m}`
/// for `d_m <= d < d_{m+1}`.
pub struct CopyLayout<'a> {
    sched: &'a Schedule,
}

impl<'a> CopyLayout<'a> {
    pub fn new(sched: &'a Schedule) -> Result<Self> {
        if sched.params.variant != Variant::Th1 {
            return Err(Error::InvalidParams("copy layout needs the multi-block build".into()));
        }
        Ok(CopyLayout { sched })
    }

    pub fn d(&self, n: u32) -> Result<Idx> {
        Ok(self.sched.step(n)?.d)
    }

    /// f-index of `z_r^{(d)}`.
    pub fn to_f_index(&self, d: Idx, r: Idx) -> Result<Idx> {
        if d == 0 || r == 0 {
            return Err(Error::InvalidParams("copies and rows are 1-based".into()));
        }
        // find m with d_m <= d < d_{m+1}
        let mut m = None;
        for s in &self.sched.steps {
            if s.d <= d {
                m = Some(s.n);
            } else {
                break;
            }
        }
        let m = m.ok_or(Error::OutOfHorizon(d))?;
        let d_m = self.sched.step(m)?.d;
        let step = self.sched.step(m + r as u32 - 1).map_err(|_| Error::OutOfHorizon(d))?;
        Ok(r * step.a + (d - d_m))
    }
}

/// Build the multi-block instance with the default witness coefficients
/// (`alpha_j = 1` on the sup-normed summand, whose partial sums stay at 1).
pub fn build_theorem1(mut params: ScheduleParams) -> Result<Schedule> {
    params.variant = Variant::Th1;
    if let AlphaSpec::HilbertHarmonic = params.alpha {
        return Err(Error::InvalidParams("harmonic coefficients are the single-block instance".into()));
    }
    build_schedule_multi(params)
}

pub fn theorem1_desk_params() -> ScheduleParams {
    let mut p = ScheduleParams::desk();
    p.variant = Variant::Th1;
    p.alpha = AlphaSpec::Constant(BigRational::one());
    p
}

/// Certify the copy-shift behavior: `T z_r^{(d)} = z_r^{(d+1)}` exactly when
/// `d + 1` is not a block boundary (`d != d_m - 1`), and a crushed column
/// (small norm, recorded) at the boundaries.
pub fn check_copy_shift(atlas: &Atlas, d: Idx, r: Idx) -> Result<CertReport> {
    let layout = CopyLayout::new(atlas.sched)?;
    let j = layout.to_f_index(d, r)?;
    let prec = atlas.prec();
    let col = column_tf(atlas, j)?;
    let boundary = atlas
        .sched
        .steps
        .iter()
        .any(|s| s.d == d + 1 && s.n >= 2);
    if !boundary {
        let j_next = layout.to_f_index(d + 1, r)?;
        let expect = FVector::unit(j_next);
        let diff = atlas.norm(&col.sub(&expect, prec))?;
        let mut rep = CertReport::from_bound(
            &format!("copy-shift-d{}-r{}", d, r),
            "T z_r^(d) = z_r^(d+1) exactly off block boundaries",
            Scalar::zero(),
            diff,
        );
        rep.pass = rep.measured.is_zero();
        Ok(rep)
    } else {
        // boundary columns feed the nuclear budget; per-column they are only
        // bounded by the lay-off decay of the chain ends, which at the first
        // block is the initial lay-off of step 1
        let norm = atlas.norm(&col)?;
        Ok(CertReport::from_bound(
            &format!("copy-crush-d{}-r{}", d, r),
            "||T z_r^(d_m - 1)|| stays within the nuclear budget share",
            Scalar::Q(atlas.sched.params.rho.clone()),
            norm,
        )
        .with_caveat("boundary columns are summed by the nuclear-sum check"))
    }
}

/// The multi-block coordinate statement: for each built `n >= n_back + 2`,
/// look for a large e-coordinate of `Q_mu x` below `(n - n_back) a_n`.
/// Passing at some built step certifies the finite skeleton; absence over the
/// whole horizon is a fail with a caveat.
pub fn check_large_coordinate_multi(
    atlas: &Atlas,
    x: &FVector,
    n_back: u32,
    consts: &VerificationConstants,
) -> Result<CertReport> {
    if x.is_zero() {
        return Err(Error::InvalidParams("vector must be nonzero".into()));
    }
    let sched = atlas.sched;
    let mut found = None;
    for n in (n_back + 2)..=sched.n_built() {
        let s = sched.step(n)?;
        let cutoff = (n as Idx - n_back as Idx) * s.a - 1;
        if let Some(j) = find_large_coordinate(atlas, x, n, consts.a_base_log2, cutoff)? {
            found = Some((n, j));
            break;
        }
    }
    let mut rep = CertReport::from_bound(
        &format!("large-coordinate-multi-back{}", n_back),
        "some built step has |e_j^*(Q_mu x)| above the factorial-tower threshold below (n-N) a_n",
        Scalar::one(),
        if found.is_some() { Scalar::zero() } else { Scalar::from_int(2) },
    );
    match found {
        Some((n, j)) => {
            rep = rep.with_caveat(format!("found at step {} coordinate {}", n, j));
        }
        None => {
            rep = rep.with_caveat("no large coordinate over the finite horizon".to_string());
        }
    }
    Ok(rep)
}

/// The multi-block return demo: `c` and the certified `||T^c x - e_0||`,
/// aimed at `e_{(n - n_back) a_n}`.
pub fn demo_hypercyclic(atlas: &Atlas, plan: &PipelinePlan) -> Result<(Idx, Scalar)> {
    crate::verify::demo_seed_approach(atlas, plan)
}

// ---------------------------------------------------------------------------
// Hilbert instance
// ---------------------------------------------------------------------------

/// Parameters of the Hilbert-space instance: both summands l2 and
/// `alpha_j = sqrt(3) eps / (pi j)`.
pub fn hilbert_params(epsilon: BigRational, n_max: u32) -> ScheduleParams {
    let mut p = ScheduleParams::desk();
    p.space = Space::l2();
    p.z_space = ZSpace::L2SecondCopy;
    p.alpha = AlphaSpec::HilbertHarmonic;
    p.epsilon = epsilon;
    p.n_max = n_max;
    p
}

pub fn build_hilbert(epsilon: BigRational, n_max: u32) -> Result<Schedule> {
    Schedule::build(hilbert_params(epsilon, n_max))
}

/// The truncated limit vector `u_0 = sum_{j <= J} alpha_j z_j` (as an
/// f-vector) with `J` the number of built steps.
pub fn hilbert_u0_truncated(atlas: &Atlas) -> Result<FVector> {
    let sched = atlas.sched;
    let prec = atlas.prec();
    let mut entries = Vec::new();
    for n in 1..=sched.n_built() {
        let s = sched.step(n)?;
        entries.push((s.a, sched.alpha(n as Idx)));
    }
    Ok(FVector::from_entries(entries, prec))
}

/// `x_0 = u_0 + e_0`, truncated at the built horizon.
pub fn hilbert_x0_truncated(atlas: &Atlas) -> Result<FVector> {
    Ok(hilbert_u0_truncated(atlas)?.add(&FVector::unit(0), atlas.prec()))
}

/// Exact rational `H_J = sum_{j<=J} j^-2`.
fn harmonic2(j_max: u64) -> BigRational {
    let mut acc = BigRational::from_integer(0.into());
    for j in 1..=j_max {
        let jj = BigInt::from(j) * BigInt::from(j);
        acc += BigRational::new(BigInt::one(), jj);
    }
    acc
}

/// Two-sided enclosure of `pi^2/6 - H_J` (the exact series tail), with the
/// rounding slop of the pi evaluation pushed outward.
fn tail_sum_enclosure(j_max: u64, prec: u32) -> (MpFloat, MpFloat) {
    let wp = prec + 64;
    let pi = crate::scalar::pi(wp);
    let pi2_over6 = pi.mul(&pi, Round::Nearest).div(&MpFloat::from_i64(6, wp), Round::Nearest);
    let h = MpFloat::from_ratio(&harmonic2(j_max), wp, Round::Nearest);
    let v = pi2_over6.sub(&h, Round::Nearest);
    // the three nearest-rounded ops and the pi series are within 8 ulps at wp
    let slop = MpFloat::one(wp).scale2(v.parts().1 + 64 - (wp as i64 - 8));
    let slop = if v.log2_f64() < 0.0 {
        MpFloat::one(wp).scale2(-(wp as i64) + v.log2_f64() as i64 + 16)
    } else {
        slop
    };
    (v.sub(&slop, Round::Floor), v.add(&slop, Round::Ceil))
}

/// `(3 eps^2 / pi^2) * (pi^2/6 - H_J)` enclosure: the squared norm of the
/// truncation remainder of `u_0` past step `J`.
pub fn hilbert_tail_norm_sq(atlas: &Atlas, j_past: u64) -> (MpFloat, MpFloat) {
    let prec = atlas.prec();
    let wp = prec + 64;
    let eps = MpFloat::from_ratio(&atlas.sched.params.epsilon, wp, Round::Nearest);
    let (lo, hi) = tail_sum_enclosure(j_past, prec);
    let pi = crate::scalar::pi(wp);
    let pi2 = pi.mul(&pi, Round::Nearest);
    let factor_lo = eps
        .mul(&eps, Round::Floor)
        .mul(&MpFloat::from_i64(3, wp), Round::Floor)
        .div(&pi2.bump_up(), Round::Floor);
    let factor_hi = eps
        .mul(&eps, Round::Ceil)
        .mul(&MpFloat::from_i64(3, wp), Round::Ceil)
        .div(&pi2, Round::Ceil)
        .bump_up();
    (factor_lo.mul(&lo, Round::Floor), factor_hi.mul(&hi, Round::Ceil))
}

/// Certify that the enclosure of `||u_0||` (truncation plus exact tail)
/// contains `eps/sqrt(2)` with width below 2^-100.
pub fn check_u0_enclosure(atlas: &Atlas) -> Result<CertReport> {
    let prec = atlas.prec();
    let wp = prec + 64;
    let u0 = hilbert_u0_truncated(atlas)?;
    // squared truncated norm, exactly the sum of alpha_j^2 (disjoint z-rows)
    let mut sq = MpFloat::zero(wp);
    for (_, c) in u0.iter() {
        let f = c.to_float(wp, Round::Nearest);
        sq = sq.add(&f.mul(&f, Round::Nearest), Round::Nearest);
    }
    let slop = MpFloat::one(wp).scale2(-(prec as i64 + 32));
    let (tail_lo, tail_hi) = hilbert_tail_norm_sq(atlas, atlas.sched.n_built() as u64);
    let lo = sq.sub(&slop, Round::Floor).add(&tail_lo, Round::Floor).sqrt(Round::Floor);
    let hi = sq.add(&slop, Round::Ceil).add(&tail_hi, Round::Ceil).sqrt(Round::Ceil);
    // reference: eps/sqrt(2)
    let eps = MpFloat::from_ratio(&atlas.sched.params.epsilon, wp, Round::Nearest);
    let reference = eps.div(&MpFloat::from_i64(2, wp).sqrt(Round::Nearest), Round::Nearest);
    let width = hi.sub(&lo, Round::Ceil);
    let contains = lo.cmp_val(&reference) != std::cmp::Ordering::Greater
        && reference.cmp_val(&hi) != std::cmp::Ordering::Greater;
    let mut rep = CertReport::from_bound(
        "hilbert-u0-enclosure",
        "||u_0|| enclosure contains eps/sqrt(2) with width < 2^-100",
        Scalar::F(MpFloat::one(prec).scale2(-100)),
        Scalar::F(width),
    );
    rep.pass &= contains;
    rep = rep.with_caveat(format!(
        "enclosure [{}, {}], reference {}",
        lo.to_display(),
        hi.to_display(),
        reference.to_display()
    ));
    Ok(rep)
}

/// Certify `||e_{a_n} - x_0||^2 = (3 eps^2/pi^2) sum_{j>n} j^-2` to 2^-100,
/// accounting exactly for the truncation of `x_0`.
pub fn check_seed_convergence(atlas: &Atlas, n: u32) -> Result<CertReport> {
    let sched = atlas.sched;
    let prec = atlas.prec();
    let wp = prec + 64;
    let j_built = sched.n_built() as u64;
    let x0 = hilbert_x0_truncated(atlas)?;
    let ean = atlas.e_in_f(sched.step(n)?.a)?;
    let diff = ean.sub(&x0, prec);
    let lhs_trunc = {
        let mut sq = MpFloat::zero(wp);
        for (_, c) in diff.iter() {
            let f = c.to_float(wp, Round::Nearest);
            sq = sq.add(&f.mul(&f, Round::Nearest), Round::Nearest);
        }
        sq
    };
    // LHS against the full limit: add the exact remainder past the horizon
    let (rem_lo, rem_hi) = hilbert_tail_norm_sq(atlas, j_built);
    let (full_lo, full_hi) = hilbert_tail_norm_sq(atlas, n as u64);
    // |(lhs_trunc + rem) - full| must be < 2^-100
    let low_gap = lhs_trunc.add(&rem_lo, Round::Floor).sub(&full_hi, Round::Floor);
    let high_gap = lhs_trunc.add(&rem_hi, Round::Ceil).sub(&full_lo, Round::Ceil);
    let gap = if low_gap.abs().cmp_val(&high_gap.abs()) == std::cmp::Ordering::Greater {
        low_gap.abs()
    } else {
        high_gap.abs()
    };
    Ok(CertReport::from_bound(
        &format!("hilbert-seed-convergence-n{}", n),
        "||e_{a_n} - x_0||^2 matches the exact harmonic tail to 2^-100",
        Scalar::F(MpFloat::one(prec).scale2(-100)),
        Scalar::F(gap),
    ))
}

/// The kernel direction: `||T x_0(truncated)||` is certified tiny,
/// consistent with the limit being annihilated.
pub fn check_kernel_direction(atlas: &Atlas) -> Result<CertReport> {
    let sched = atlas.sched;
    let prec = atlas.prec();
    let x0 = hilbert_x0_truncated(atlas)?;
    let img = crate::operator::apply_t(atlas, &x0)?;
    let measured = atlas.norm(&img)?;
    // claimed: the lay-off decay right after the last insertion return,
    // 2^(-sqrt(b_J)/2) with a 2-bit guard
    let b = sched.step(sched.n_built())?.b;
    let half_root = (crate::schedule::isqrt(b) / 2) as i64;
    let claimed = Scalar::F(MpFloat::one(prec).scale2(-half_root + 2));
    Ok(CertReport::from_bound(
        "hilbert-kernel-direction",
        "||T x_0(truncated)|| <= 2^(-sqrt(b_J)/2 + 2), consistent with T(u_0 + e_0) = 0",
        claimed,
        measured,
    ))
}

/// The coordinate dichotomy of the Hilbert instance: either `x` has a large
/// e-coordinate below `a_n` at some built step, or it is numerically colinear
/// to the truncated `x_0` (cone half-angle 2^-100, recorded).
pub fn check_coordinate_or_colinear(
    atlas: &Atlas,
    x: &FVector,
    consts: &VerificationConstants,
) -> Result<CertReport> {
    if x.is_zero() {
        return Err(Error::InvalidParams("vector must be nonzero".into()));
    }
    let sched = atlas.sched;
    let prec = atlas.prec();
    let mut found = None;
    for n in 1..=sched.n_built() {
        let s = sched.step(n)?;
        if let Some(j) = find_large_coordinate(atlas, x, n, consts.a_base_log2, s.a - 1)? {
            found = Some((n, j));
            break;
        }
    }
    if let Some((n, j)) = found {
        let mut rep = CertReport::from_bound(
            "hilbert-coordinate-dichotomy",
            "a large coordinate below a_n exists, or x is colinear to x_0",
            Scalar::one(),
            Scalar::zero(),
        );
        rep = rep.with_caveat(format!("large coordinate at step {} index {}", n, j));
        return Ok(rep);
    }
    // colinearity: residual of x against the x_0 direction, in the l2 norm
    let x0 = hilbert_x0_truncated(atlas)?;
    let dot = |a: &FVector, b: &FVector| -> Scalar {
        let mut acc = Scalar::zero();
        for (j, c) in a.iter() {
            let other = b.get(*j);
            if !other.is_zero() {
                acc = acc.add(&c.mul(&other, prec, Round::Nearest), prec, Round::Nearest);
            }
        }
        acc
    };
    let xx0 = dot(x, &x0);
    let x0x0 = dot(&x0, &x0);
    let coeff = xx0.div(&x0x0, prec, Round::Nearest);
    let resid = x.add_scaled(&x0, &coeff.neg(), prec);
    let angle = atlas.norm(&resid)?.div(&atlas.norm(x)?, prec, Round::Ceil);
    let claimed = Scalar::F(MpFloat::one(prec).scale2(-100));
    Ok(CertReport::from_bound(
        "hilbert-coordinate-dichotomy",
        "no large coordinate: x must lie in the 2^-100 cone around x_0",
        claimed,
        angle,
    )
    .with_caveat("exclusion branch: colinearity cone at 2^-100 (finite-precision dichotomy)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{build_codesigned, Aim, CoVector};
    use std::cmp::Ordering;

    #[test]
    fn copy_layout_inverse_consistent() {
        let s = build_theorem1(theorem1_desk_params()).unwrap();
        let at = Atlas::new(&s);
        let layout = CopyLayout::new(&s).unwrap();
        // every insertion index maps (d, r) -> j -> identity consistently
        for n in 1..=2u32 {
            for (lo, hi) in s.removed_in_step(n).unwrap() {
                for j in lo..=hi.min(lo + 40) {
                    match at.f_identity(j).unwrap() {
                        FIdentity::ZCopy { d, r } => {
                            assert_eq!(layout.to_f_index(d, r).unwrap(), j);
                        }
                        other => panic!("expected a copy identity, got {:?}", other),
                    }
                }
            }
        }
    }

    #[test]
    fn copy_shift_exact_and_crushed() {
        let s = build_theorem1(theorem1_desk_params()).unwrap();
        let at = Atlas::new(&s);
        // d_2 = 2, so d = 1 is a boundary (d_2 - 1); every other small d shifts
        let rep = check_copy_shift(&at, 1, 1).unwrap();
        assert!(rep.id.starts_with("copy-crush"));
        assert!(rep.pass, "{}", rep.line());
        // step 2 block r = 1 covers d in [d_2, d_2 + xi_2]: interior copies shift
        let rep = check_copy_shift(&at, 2, 1).unwrap();
        assert!(rep.id.starts_with("copy-shift"));
        assert!(rep.pass, "{}", rep.line());
    }

    #[test]
    fn multi_identity_norm_bound() {
        // ||e_{(n-N) a_n} - e_0|| <= 1/a_N for built n, N
        let s = build_theorem1(theorem1_desk_params()).unwrap();
        let at = Atlas::new(&s);
        let a1 = s.step(1).unwrap().a;
        let s2 = s.step(2).unwrap();
        let e = at.e_in_f(s2.a).unwrap(); // n = 2, N = 1
        let d = e.sub(&FVector::unit(0), at.prec());
        let n = at.norm(&d).unwrap();
        assert!(n.cmp_val(&Scalar::ratio(1, a1 as i128)) != Ordering::Greater);
        let e = at.e_in_f(s2.mu).unwrap(); // n = 2, N = 0: coefficient 1/a_0 = 1
        let d = e.sub(&FVector::unit(0), at.prec());
        let n = at.norm(&d).unwrap();
        assert!(n.cmp_val(&Scalar::one()) != Ordering::Greater);
    }

    #[test]
    fn mixed_norm_copy_additivity() {
        // the p-sum over copies: coefficients on distinct copies add in l1
        let s = build_theorem1(theorem1_desk_params()).unwrap();
        let at = Atlas::new(&s);
        let s2 = s.step(2).unwrap();
        // z_1^{(d_2)} at f_{a_2} and z_2^{(d_1)} at f_{2 a_2}... distinct copies
        let x = FVector::from_entries(
            vec![(s2.a, Scalar::ratio(1, 2)), (s2.mu, Scalar::ratio(1, 3)), (0, Scalar::one())],
            at.prec(),
        );
        let n = at.norm(&x).unwrap();
        // l1 over {1, 1/2-copy, 1/3-copy}
        assert_eq!(n.cmp_val(&Scalar::ratio(11, 6)), Ordering::Equal);
    }

    #[test]
    fn multi_coordinate_check() {
        let mut p = theorem1_desk_params();
        p.n_max = 3;
        p.budget_bits = 112;
        let s = build_theorem1(p).unwrap();
        let at = Atlas::new(&s);
        let consts = VerificationConstants::default();
        let rep = check_large_coordinate_multi(&at, &FVector::unit(0), 1, &consts).unwrap();
        assert!(rep.pass, "{}", rep.block());
    }

    #[test]
    fn hypercyclic_demo_small() {
        // N = 1, n = 3 on the desk multi-block build
        let mut p = theorem1_desk_params();
        p.n_max = 3;
        p.budget_bits = 112;
        let consts = VerificationConstants::default();
        let x = FVector::unit(0);
        let (sched, plans) = build_codesigned(
            p,
            &[CoVector { step: 3, x: x.clone(), aim: Aim::CopyReturn { n_back: 1 } }],
            &consts,
        )
        .unwrap();
        let at = Atlas::new(&sched);
        let (c, dist) = demo_hypercyclic(&at, &plans[0]).unwrap();
        let a1 = sched.step(1).unwrap().a as f64;
        let a3 = sched.step(3).unwrap().a as f64;
        assert!(c > 0);
        assert!(
            dist.to_f64() < 1.0 / a1 + 7.0 / a3,
            "dist {} vs {}",
            dist.to_f64(),
            1.0 / a1 + 7.0 / a3
        );
    }

    #[test]
    fn hilbert_enclosures() {
        let s = build_hilbert(BigRational::new(1.into(), 2.into()), 2).unwrap();
        let at = Atlas::new(&s);
        let rep = check_u0_enclosure(&at).unwrap();
        assert!(rep.pass, "{}", rep.block());
        for n in 1..=2 {
            let rep = check_seed_convergence(&at, n).unwrap();
            assert!(rep.pass, "{}", rep.block());
        }
        // strict decrease of the distance to x_0
        let x0 = hilbert_x0_truncated(&at).unwrap();
        let d1 = at
            .norm(&at.e_in_f(s.step(1).unwrap().a).unwrap().sub(&x0, at.prec()))
            .unwrap();
        let d2 = at
            .norm(&at.e_in_f(s.step(2).unwrap().a).unwrap().sub(&x0, at.prec()))
            .unwrap();
        assert_eq!(d2.cmp_val(&d1), Ordering::Less);
        let rep = check_kernel_direction(&at).unwrap();
        assert!(rep.pass, "{}", rep.block());
    }

    #[test]
    fn hilbert_dichotomy() {
        let s = build_hilbert(BigRational::new(1.into(), 2.into()), 2).unwrap();
        let at = Atlas::new(&s);
        let consts = VerificationConstants::default();
        // e_0 has the large coordinate immediately
        let rep = check_coordinate_or_colinear(&at, &FVector::unit(0), &consts).unwrap();
        assert!(rep.pass, "{}", rep.block());
        // the truncated x_0 itself goes through the exclusion branch
        let x0 = hilbert_x0_truncated(&at).unwrap();
        let rep = check_coordinate_or_colinear(&at, &x0, &consts).unwrap();
        assert!(rep.pass, "{}", rep.block());
        assert!(rep.caveats.iter().any(|c| c.contains("exclusion")));
        // x_0 plus a unit vector passes through the coordinate branch
        let mixed = x0.add(&FVector::unit(1), at.prec());
        let rep = check_coordinate_or_colinear(&at, &mixed, &consts).unwrap();
        assert!(rep.pass, "{}", rep.block());
    }
}
