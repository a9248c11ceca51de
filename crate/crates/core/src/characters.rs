//! Additive characters of `Q_p` and exact arithmetic in the cyclotomic rings
//! they generate.
//!
//! `character(xi, x)` is the root of unity `exp(2 pi i {xi x}_p)`, recorded
//! exactly by its angle — a rational in `[0, 1)` with a p-power denominator.
//! Character sums live in `Z[zeta_{p^k}] (x) Q`, represented on the power
//! basis `1, zeta, ..., zeta^{phi(p^k)-1}` with exact rational coefficients.
//! Elements are kept in a canonical form: coefficients reduced through the
//! cyclotomic relation `sum_{j<p} zeta^{j p^{k-1}} = 0` and the level shrunk
//! to the smallest field containing the element, so structural equality is
//! field equality.

use num::rational::BigRational;
use num::{One, Zero};
use std::fmt;

use crate::error::{Error, Result};
use crate::padic::PadicScalar;
use crate::rational::{is_prime, prime_power};

/// `phi(p^k)`: the power-basis length at level `k` (1 at level zero).
fn phi(p: u64, level: u32) -> usize {
    if level == 0 {
        1
    } else {
        (p.pow(level) - p.pow(level - 1)) as usize
    }
}

/// A root of unity of p-power order, stored as its angle: a rational in
/// `[0, 1)` whose denominator is a power of `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootOfUnity {
    p: u64,
    angle: BigRational,
}

impl RootOfUnity {
    /// Build from an arbitrary rational angle; the angle is reduced mod 1 and
    /// must then have a p-power denominator.
    pub fn new(p: u64, angle: BigRational) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let reduced = &angle - angle.floor();
        let mut d = reduced.denom().clone();
        let pb = num::BigInt::from(p);
        while (&d % &pb).is_zero() {
            d /= &pb;
        }
        if !d.is_one() {
            return Err(Error::InvalidParameter(format!(
                "angle {reduced} does not have a {p}-power denominator"
            )));
        }
        Ok(RootOfUnity { p, angle: reduced })
    }

    pub fn one(p: u64) -> Self {
        RootOfUnity {
            p,
            angle: BigRational::zero(),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn angle(&self) -> &BigRational {
        &self.angle
    }

    pub fn is_one(&self) -> bool {
        self.angle.is_zero()
    }

    /// Smallest `k` with `angle * p^k` integral: the root lives in the
    /// `p^k`-th roots of unity.
    pub fn level(&self) -> u32 {
        let mut k = 0u32;
        let mut d = self.angle.denom().clone();
        let pb = num::BigInt::from(self.p);
        while !d.is_one() {
            d /= &pb;
            k += 1;
        }
        k
    }

    /// Group law: angles add modulo 1.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.p, other.p, "roots of unity over different primes");
        let sum = &self.angle + &other.angle;
        RootOfUnity {
            p: self.p,
            angle: &sum - sum.floor(),
        }
    }

    pub fn inverse(&self) -> Self {
        if self.angle.is_zero() {
            return self.clone();
        }
        RootOfUnity {
            p: self.p,
            angle: BigRational::one() - &self.angle,
        }
    }

    /// Exact embedding into the cyclotomic ring at the root's own level.
    pub fn to_cyclotomic(&self) -> CyclotomicElement {
        let level = self.level();
        let pk = prime_power(self.p, level as i64);
        let exponent_big = (&self.angle * pk).to_integer();
        let exponent = u64::try_from(exponent_big.clone())
            .unwrap_or_else(|_| panic!("angle exponent {exponent_big} out of range"))
            as usize;
        CyclotomicElement::monomial(self.p, level, exponent, BigRational::one())
    }

    /// `(cos, sin)` of the angle, for reporting only.
    pub fn complex_approx(&self) -> (f64, f64) {
        let t = crate::rational::rat_to_f64(&self.angle) * std::f64::consts::TAU;
        (t.cos(), t.sin())
    }
}

/// The additive character `chi_xi(x) = exp(2 pi i {xi x}_p)`, evaluated
/// exactly. Locally constant: if `|xi| <= p^m` and `|x - x'| <= p^{-m}`,
/// then `chi_xi(x) = chi_xi(x')`.
pub fn character(xi: &PadicScalar, x: &PadicScalar) -> RootOfUnity {
    assert_eq!(xi.p(), x.p(), "character arguments over different primes");
    let product = xi.mul(x);
    RootOfUnity {
        p: xi.p(),
        angle: product.fractional_part(),
    }
}

/// An element of `Z[zeta_{p^k}] (x) Q` in canonical form: coefficients on the
/// power basis `zeta^0 .. zeta^{phi(p^k)-1}`, with the level minimal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclotomicElement {
    p: u64,
    level: u32,
    coeffs: Vec<BigRational>,
}

impl CyclotomicElement {
    pub fn zero(p: u64) -> Self {
        CyclotomicElement {
            p,
            level: 0,
            coeffs: vec![BigRational::zero()],
        }
    }

    pub fn one(p: u64) -> Self {
        Self::from_rational(p, BigRational::one())
    }

    pub fn from_rational(p: u64, q: BigRational) -> Self {
        CyclotomicElement {
            p,
            level: 0,
            coeffs: vec![q],
        }
    }

    /// `c * zeta_{p^level}^exponent`, reduced to canonical form.
    pub fn monomial(p: u64, level: u32, exponent: usize, c: BigRational) -> Self {
        let order = p.pow(level) as usize;
        let mut full = vec![BigRational::zero(); order];
        full[exponent % order] = c;
        Self::from_group_algebra(p, level, full)
    }

    pub fn from_root(r: &RootOfUnity) -> Self {
        r.to_cyclotomic()
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(BigRational::is_zero)
    }

    /// The element as a plain rational, when it lies in the base field.
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.level == 0 {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    /// Reduce a coefficient vector over the full group `zeta^0..zeta^{p^k-1}`
    /// to the power basis, then normalize the level.
    fn from_group_algebra(p: u64, level: u32, mut full: Vec<BigRational>) -> Self {
        debug_assert_eq!(full.len(), p.pow(level) as usize);
        let ph = phi(p, level);
        if level > 0 {
            let stride = p.pow(level - 1) as usize;
            for e in ph..full.len() {
                if full[e].is_zero() {
                    continue;
                }
                let c = std::mem::replace(&mut full[e], BigRational::zero());
                let r = e - ph;
                // zeta^{(p-1)p^{k-1}+r} = -sum_{j<p-1} zeta^{r+j p^{k-1}}
                for j in 0..(p as usize - 1) {
                    full[r + j * stride] -= &c;
                }
            }
        }
        full.truncate(ph);
        let mut out = CyclotomicElement {
            p,
            level,
            coeffs: full,
        };
        out.normalize_level();
        out
    }

    /// Shrink to the smallest level whose power basis carries the element.
    fn normalize_level(&mut self) {
        while self.level > 0 {
            let p = self.p as usize;
            let down_len = phi(self.p, self.level - 1);
            let liftable = self
                .coeffs
                .iter()
                .enumerate()
                .all(|(e, c)| c.is_zero() || e % p == 0);
            if !liftable {
                return;
            }
            let coeffs = (0..down_len)
                .map(|t| self.coeffs[t * p].clone())
                .collect();
            self.coeffs = coeffs;
            self.level -= 1;
        }
    }

    /// Power-basis coefficients of the element written at a (weakly) higher
    /// level `k`: exponents scale by `p^{k - level}`. Elements themselves stay
    /// in minimal-level canonical form; this accessor is how two elements are
    /// aligned on a common basis.
    pub fn coeffs_at_level(&self, k: u32) -> Vec<BigRational> {
        assert!(k >= self.level, "lift target below current level");
        if k == self.level {
            return self.coeffs.clone();
        }
        let stride = self.p.pow(k - self.level) as usize;
        let mut coeffs = vec![BigRational::zero(); phi(self.p, k)];
        for (e, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[e * stride] = c.clone();
            }
        }
        coeffs
    }

    fn assert_same_prime(&self, other: &Self) {
        assert_eq!(
            self.p, other.p,
            "cyclotomic elements over different primes cannot be combined"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        let k = self.level.max(other.level);
        let a = self.coeffs_at_level(k);
        let b = other.coeffs_at_level(k);
        let coeffs = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
        let mut out = CyclotomicElement {
            p: self.p,
            level: k,
            coeffs,
        };
        out.normalize_level();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        CyclotomicElement {
            p: self.p,
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, w: &BigRational) -> Self {
        if w.is_zero() {
            return Self::zero(self.p);
        }
        CyclotomicElement {
            p: self.p,
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * w).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        let k = self.level.max(other.level);
        let a = self.coeffs_at_level(k);
        let b = other.coeffs_at_level(k);
        let order = self.p.pow(k) as usize;
        let mut full = vec![BigRational::zero(); order];
        for (e1, c1) in a.iter().enumerate() {
            if c1.is_zero() {
                continue;
            }
            for (e2, c2) in b.iter().enumerate() {
                if c2.is_zero() {
                    continue;
                }
                full[(e1 + e2) % order] += c1 * c2;
            }
        }
        Self::from_group_algebra(self.p, k, full)
    }

    /// Complex conjugation: `zeta -> zeta^{-1}`, a ring involution.
    pub fn conjugate(&self) -> Self {
        let order = self.p.pow(self.level) as usize;
        let mut full = vec![BigRational::zero(); order];
        for (e, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                full[(order - e) % order] += c;
            }
        }
        Self::from_group_algebra(self.p, self.level, full)
    }

    /// Exact reality test: the element equals its conjugate.
    pub fn is_real(&self) -> bool {
        *self == self.conjugate()
    }

    /// Float `(re, im)` under `zeta -> exp(2 pi i / p^level)`; reporting only.
    pub fn complex_approx(&self) -> (f64, f64) {
        let order = self.p.pow(self.level) as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cf = crate::rational::rat_to_f64(c);
            let t = std::f64::consts::TAU * (e as f64) / order;
            re += cf * t.cos();
            im += cf * t.sin();
        }
        (re, im)
    }
}

impl fmt::Display for CyclotomicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})*z{}^{e}", self.p.pow(self.level))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_from_str;

    fn q(s: &str) -> BigRational {
        rat_from_str(s).unwrap()
    }

    fn root(p: u64, angle: &str) -> CyclotomicElement {
        RootOfUnity::new(p, q(angle)).unwrap().to_cyclotomic()
    }

    #[test]
    fn character_of_half_is_minus_one() {
        // chi_1(1/2) at p=2 has angle 1/2: the root is exactly -1.
        let xi = PadicScalar::one(2);
        let x = PadicScalar::from_ratio(2, 1, 2).unwrap();
        let r = character(&xi, &x);
        assert_eq!(r.angle(), &q("1/2"));
        let c = r.to_cyclotomic();
        assert_eq!(c, CyclotomicElement::from_rational(2, q("-1")));
    }

    #[test]
    fn character_trivial_on_integers() {
        let xi = PadicScalar::from_ratio(3, 2, 1).unwrap();
        let x = PadicScalar::from_ratio(3, 7, 4).unwrap(); // |7/4|_3 = 1
        assert!(character(&xi, &x).is_one());
    }

    #[test]
    fn character_multiplicative_in_x() {
        let xi = PadicScalar::from_ratio(2, 3, 8).unwrap();
        let x = PadicScalar::from_ratio(2, 5, 4).unwrap();
        let y = PadicScalar::from_ratio(2, 7, 2).unwrap();
        let lhs = character(&xi, &x.add(&y));
        let rhs = character(&xi, &x).mul(&character(&xi, &y));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn character_locally_constant() {
        // |xi| <= p^m and |x - x'| <= p^{-m} force equal characters.
        let m = 2;
        let xi = PadicScalar::from_ratio(2, 3, 4).unwrap(); // norm 4 = 2^m
        let x = PadicScalar::from_ratio(2, 1, 2).unwrap();
        let x2 = x.add(&PadicScalar::from_ratio(2, 12, 1).unwrap()); // 12 = 4*3, |12|_2 = 1/4
        assert!(xi.norm() <= prime_power(2, m));
        assert_eq!(character(&xi, &x), character(&xi, &x2));
    }

    #[test]
    fn conjugate_of_i_is_minus_i() {
        // p=2, level 2: conjugate(zeta_4) = zeta_4^3 = -zeta_4.
        let z = root(2, "1/4");
        let conj = z.conjugate();
        assert_eq!(conj, z.neg());
        assert!(!z.is_real());
    }

    #[test]
    fn primitive_root_sums_vanish() {
        // sum_{j=0}^{p-1} zeta_p^j = 0 for p in {2, 3, 5}.
        for p in [2u64, 3, 5] {
            let mut acc = CyclotomicElement::zero(p);
            for j in 0..p {
                acc = acc.add(&CyclotomicElement::monomial(
                    p,
                    1,
                    j as usize,
                    BigRational::one(),
                ));
            }
            assert!(acc.is_zero(), "p = {p}");
            assert_eq!(acc, CyclotomicElement::zero(p));
        }
    }

    #[test]
    fn full_cycle_cancellation() {
        // Sum of character(xi, c) over a complete residue system of
        // Z_p / p^k Z_p vanishes whenever 1 < |xi| <= p^k.
        for p in [2u64, 3] {
            for k in 1..=3u32 {
                for t in 1..=k {
                    let xi = PadicScalar::new(p, prime_power(p, -(t as i64))).unwrap();
                    let mut acc = CyclotomicElement::zero(p);
                    for c in 0..p.pow(k) {
                        let x = PadicScalar::from_int(p, c as i64);
                        acc = acc.add(&character(&xi, &x).to_cyclotomic());
                    }
                    assert!(acc.is_zero(), "p={p} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn product_reduces_level() {
        // zeta_4 * zeta_4 = zeta_2 = -1: the canonical form drops to level 0.
        let z = root(2, "1/4");
        let sq = z.mul(&z);
        assert_eq!(sq, CyclotomicElement::from_rational(2, q("-1")));
        assert_eq!(sq.level(), 0);
    }

    #[test]
    fn norm_form_is_real() {
        // c * conj(c) is fixed by conjugation for arbitrary elements.
        let c = root(3, "1/9")
            .scale(&q("2/3"))
            .add(&root(3, "4/9").scale(&q("-1/2")))
            .add(&CyclotomicElement::from_rational(3, q("5")));
        let n = c.mul(&c.conjugate());
        assert!(n.is_real());
        assert!(!n.is_zero());
    }

    #[test]
    fn lift_and_equality_across_levels() {
        let a = root(5, "1/5");
        assert_eq!(a.level(), 1);
        // Aligned coefficients at level 3 place the unit at exponent 25 ...
        let lifted = a.coeffs_at_level(3);
        assert_eq!(lifted.len(), 100);
        assert!(lifted[25].is_one());
        assert_eq!(lifted.iter().filter(|c| !c.is_zero()).count(), 1);
        // ... and rebuilding from them recovers the canonical element.
        let back = CyclotomicElement::monomial(5, 3, 25, BigRational::one());
        assert_eq!(back, a);
        assert_eq!(back.level(), 1);
    }

    #[test]
    fn complex_approx_matches_euler() {
        let z = root(2, "1/8");
        let (re, im) = z.complex_approx();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((re - s).abs() < 1e-12);
        assert!((im - s).abs() < 1e-12);
        // And the exact reality test agrees with the numeric picture.
        let sym = z.add(&z.conjugate());
        assert!(sym.is_real());
        let (_, im2) = sym.complex_approx();
        assert!(im2.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(RootOfUnity::new(2, q("1/3")).is_err());
        assert!(RootOfUnity::new(4, q("1/4")).is_err());
        // Angles reduce mod 1 first.
        let r = RootOfUnity::new(3, q("4/3")).unwrap();
        assert_eq!(r.angle(), &q("1/3"));
    }
}
