//! Polynomials in one variable with high-precision coefficients, stored
//! sparsely: the deep-schedule pipelines produce monomials of astronomical
//! degree, so dense coefficient lists are not an option.

use crate::scalar::{Round, Scalar};
use crate::{Error, Idx, Result};
use num_rational::BigRational;
use num_traits::Signed;

/// Sparse coefficient list `(degree, coefficient)`, sorted by degree,
/// no stored zeros.
#[derive(Clone, Debug)]
pub struct Polynomial {
    terms: Vec<(Idx, Scalar)>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Scalar>) -> Self {
        Polynomial {
            terms: coeffs
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| (k as Idx, c))
                .collect(),
        }
    }

    pub fn from_terms(mut terms: Vec<(Idx, Scalar)>) -> Self {
        terms.retain(|(_, c)| !c.is_zero());
        terms.sort_by_key(|t| t.0);
        Polynomial { terms }
    }

    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn monomial(degree: Idx, coeff: Scalar) -> Self {
        if coeff.is_zero() {
            return Polynomial::zero();
        }
        Polynomial { terms: vec![(degree, coeff)] }
    }

    /// `(degree, coefficient)` pairs in increasing degree.
    pub fn terms(&self) -> &[(Idx, Scalar)] {
        &self.terms
    }

    pub fn coeff(&self, k: Idx) -> Scalar {
        match self.terms.binary_search_by_key(&k, |t| t.0) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => Scalar::zero(),
        }
    }

    pub fn degree(&self) -> Idx {
        self.terms.last().map(|t| t.0).unwrap_or(0)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The modulus `|p| = sum |a_k|`.
    pub fn modulus(&self, prec: u32) -> Scalar {
        let mut acc = Scalar::zero();
        for (_, c) in &self.terms {
            acc = acc.add(&c.abs(), prec, Round::Ceil);
        }
        acc
    }

    /// Multiply every coefficient by `s`.
    pub fn scale(&self, s: &Scalar, prec: u32) -> Self {
        Polynomial::from_terms(
            self.terms
                .iter()
                .map(|(k, c)| (*k, c.mul(s, prec, Round::Nearest)))
                .collect(),
        )
    }

    /// `zeta^k * p` (degree shift).
    pub fn shift_degree(&self, k: Idx) -> Self {
        Polynomial {
            terms: self.terms.iter().map(|(d, c)| (d + k, c.clone())).collect(),
        }
    }

    /// `|p - q|` in the coefficient modulus.
    pub fn modulus_distance(&self, other: &Self, prec: u32) -> Scalar {
        let mut acc = Scalar::zero();
        let (mut i, mut k) = (0usize, 0usize);
        while i < self.terms.len() || k < other.terms.len() {
            match (self.terms.get(i), other.terms.get(k)) {
                (Some(a), Some(b)) if a.0 == b.0 => {
                    acc = acc.add(&a.1.sub(&b.1, prec, Round::Nearest).abs(), prec, Round::Ceil);
                    i += 1;
                    k += 1;
                }
                (Some(a), Some(b)) if a.0 < b.0 => {
                    acc = acc.add(&a.1.abs(), prec, Round::Ceil);
                    i += 1;
                    let _ = b;
                }
                (Some(_), Some(b)) => {
                    acc = acc.add(&b.1.abs(), prec, Round::Ceil);
                    k += 1;
                }
                (Some(a), None) => {
                    acc = acc.add(&a.1.abs(), prec, Round::Ceil);
                    i += 1;
                }
                (None, Some(b)) => {
                    acc = acc.add(&b.1.abs(), prec, Round::Ceil);
                    k += 1;
                }
                (None, None) => break,
            }
        }
        acc
    }
}

/// Enumerate the coefficient-lattice net: degree <= `degree_cap`, spacing
/// `eps/(degree_cap+1)`, restricted to the modulus ball of radius 2. Rational
/// `eps` keeps the lattice exact. Errors out when the enumeration would
/// exceed `count_budget` polynomials.
pub fn grid_net(eps: &BigRational, degree_cap: usize, count_budget: u64) -> Result<Vec<Polynomial>> {
    if !eps.is_positive() {
        return Err(Error::InvalidParams("net spacing must be positive".into()));
    }
    let dim = degree_cap + 1;
    let spacing = eps / BigRational::from_integer((dim as i64).into());
    // radius in lattice units
    let radius = (BigRational::from_integer(2.into()) / &spacing)
        .floor()
        .to_integer();
    let radius: i64 = radius.try_into().map_err(|_| Error::NetTooLarge("lattice radius".into()))?;
    // quick size bound: (2r+1)^dim, checked in logs
    let log_count = (dim as f64) * ((2 * radius + 1) as f64).log2();
    if log_count > 63.0 || estimate_diamond(dim, radius) > count_budget {
        return Err(Error::NetTooLarge(format!(
            "dimension {} radius {} exceeds budget {}",
            dim, radius, count_budget
        )));
    }
    let mut out = Vec::new();
    let mut point = vec![0i64; dim];
    enumerate_diamond(&mut point, 0, radius, &spacing, &mut out);
    Ok(out)
}

/// Count of lattice points in the l1 diamond |k|_1 <= radius in `dim` axes;
/// used both as the budget estimate and as the brute-force test oracle.
pub fn estimate_diamond(dim: usize, radius: i64) -> u64 {
    // D(dim, r) = D(dim-1, r) + 2*sum_{j=1..r} D(dim-1, r-j)
    let r = radius as usize;
    let mut prev = vec![1u64; r + 1]; // dim = 0: one point for any budget
    for _ in 0..dim {
        let mut cur = vec![0u64; r + 1];
        for b in 0..=r {
            let mut acc = prev[b];
            for j in 1..=b {
                acc = acc.saturating_add(2 * prev[b - j]);
            }
            cur[b] = acc;
        }
        prev = cur;
    }
    prev[r]
}

fn enumerate_diamond(
    point: &mut Vec<i64>,
    axis: usize,
    budget: i64,
    spacing: &BigRational,
    out: &mut Vec<Polynomial>,
) {
    if axis == point.len() {
        let coeffs = point
            .iter()
            .map(|&k| Scalar::Q(BigRational::from_integer(k.into()) * spacing))
            .collect();
        out.push(Polynomial::new(coeffs));
        return;
    }
    for k in -budget..=budget {
        point[axis] = k;
        enumerate_diamond(point, axis + 1, budget - k.abs(), spacing, out);
    }
    point[axis] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_sums_abs() {
        let p = Polynomial::new(vec![Scalar::ratio(-1, 2), Scalar::from_int(1), Scalar::ratio(1, 4)]);
        let m = p.modulus(128);
        assert_eq!(m.cmp_val(&Scalar::ratio(7, 4)), std::cmp::Ordering::Equal);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let p = Polynomial::new(vec![Scalar::one(), Scalar::zero(), Scalar::zero()]);
        assert_eq!(p.degree(), 0);
        assert_eq!(p.term_count(), 1);
    }

    #[test]
    fn huge_degree_monomial_is_cheap() {
        let p = Polynomial::monomial(1 << 100, Scalar::ratio(1, 3));
        assert_eq!(p.degree(), 1 << 100);
        assert_eq!(p.term_count(), 1);
        let q = p.shift_degree(1 << 90);
        assert_eq!(q.degree(), (1 << 100) + (1 << 90));
    }

    #[test]
    fn modulus_distance_merges_sparsely() {
        let p = Polynomial::monomial(5, Scalar::one());
        let q = Polynomial::monomial(7, Scalar::ratio(1, 2));
        let d = p.modulus_distance(&q, 128);
        assert_eq!(d.cmp_val(&Scalar::ratio(3, 2)), std::cmp::Ordering::Equal);
        assert!(p.modulus_distance(&p, 128).is_zero());
    }

    #[test]
    fn grid_net_counts_match_oracle() {
        // independent count: diamond recurrence vs explicit enumeration
        let eps = BigRational::from_integer(1.into());
        let net = grid_net(&eps, 1, 10_000).unwrap();
        // spacing = 1/2, radius = 4 lattice units, dim = 2
        assert_eq!(net.len() as u64, estimate_diamond(2, 4));
        assert_eq!(net.len(), 41);
        for p in &net {
            let m = p.modulus(96);
            assert!(m.cmp_val(&Scalar::from_int(2)) != std::cmp::Ordering::Greater);
        }
    }

    #[test]
    fn grid_net_budget_guard() {
        let eps = BigRational::new(1.into(), 100.into());
        assert!(matches!(grid_net(&eps, 40, 1000), Err(Error::NetTooLarge(_))));
    }
}
