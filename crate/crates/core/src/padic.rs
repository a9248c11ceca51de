//! Exact p-adic scalar arithmetic over the rationals.
//!
//! A [`PadicScalar`] is a rational number tagged with a prime `p`; valuation,
//! norm and fractional part are computed exactly. The valuation of zero is
//! the [`Valuation::Infinity`] sentinel, which compares greater than every
//! finite valuation. [`Mode`] selects how measure *values* are sized: real
//! absolute value, or the s-adic norm for a second prime `s`.

use num::bigint::BigInt;
use num::integer::Integer;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{is_prime, prime_power};

/// p-adic valuation; `Infinity` is the valuation of zero and dominates every
/// finite value in the ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Infinity, Valuation::Infinity) => Ordering::Equal,
            (Valuation::Infinity, Valuation::Finite(_)) => Ordering::Greater,
            (Valuation::Finite(_), Valuation::Infinity) => Ordering::Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "inf"),
        }
    }
}

/// How weights and measure values are sized: archimedean absolute value, or
/// the s-adic norm for a prime `s` different from the base prime `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Real,
    Sadic(u64),
}

impl Mode {
    /// The mode's absolute value of a rational weight.
    pub fn abs(&self, w: &BigRational) -> BigRational {
        match self {
            Mode::Real => w.abs(),
            Mode::Sadic(s) => rational_norm(*s, w),
        }
    }

    /// Check that the mode is well formed relative to the base prime.
    pub fn validate(&self, p: u64) -> Result<()> {
        match self {
            Mode::Real => Ok(()),
            Mode::Sadic(s) => {
                if !is_prime(*s) {
                    Err(Error::NotPrime(*s))
                } else if *s == p {
                    Err(Error::InvalidParameter(format!(
                        "value prime s={s} must differ from base prime p={p}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Real => write!(f, "real"),
            Mode::Sadic(s) => write!(f, "{s}-adic"),
        }
    }
}

/// A measure value together with the mode that sizes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueScalar {
    pub value: BigRational,
    pub mode: Mode,
}

impl ValueScalar {
    pub fn new(value: BigRational, mode: Mode) -> Self {
        ValueScalar { value, mode }
    }

    /// The mode's absolute value of the carried value.
    pub fn norm(&self) -> BigRational {
        self.mode.abs(&self.value)
    }
}

/// p-adic valuation of a nonzero integer.
fn int_valuation(p: u64, x: &BigInt) -> i64 {
    debug_assert!(!x.is_zero());
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut cur = x.clone();
    loop {
        let (q, r) = cur.div_rem(&p);
        if r.is_zero() {
            v += 1;
            cur = q;
        } else {
            return v;
        }
    }
}

/// p-adic valuation of a rational: `v_p(a/b) = v_p(a) - v_p(b)`, with the
/// infinite sentinel at zero.
pub fn rational_valuation(p: u64, x: &BigRational) -> Valuation {
    if x.is_zero() {
        Valuation::Infinity
    } else {
        Valuation::Finite(int_valuation(p, x.numer()) - int_valuation(p, x.denom()))
    }
}

/// p-adic norm `|x|_p = p^{-v_p(x)}` as an exact rational; zero maps to zero.
pub fn rational_norm(p: u64, x: &BigRational) -> BigRational {
    match rational_valuation(p, x) {
        Valuation::Infinity => BigRational::zero(),
        Valuation::Finite(v) => prime_power(p, -v),
    }
}

/// Inverse of `a` modulo `m`, assuming `gcd(a, m) = 1`.
fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// The p-adic fractional part: the sum of the strictly negative-index digits
/// of `y`'s p-adic expansion, as a rational in `[0, 1)` with a p-power
/// denominator. `y - fractional_part(p, y)` is always a p-adic integer.
pub fn fractional_part(p: u64, y: &BigRational) -> BigRational {
    match rational_valuation(p, y) {
        Valuation::Finite(v) if v < 0 => {
            let k = (-v) as u32;
            let pk = BigInt::from(p).pow(k);
            // u = y * p^k has valuation zero, so its denominator is a unit
            // modulo p^k and the residue below is well defined.
            let u = y * prime_power(p, k as i64);
            let inv = mod_inverse(u.denom(), &pk);
            let residue = (u.numer() * inv).mod_floor(&pk);
            BigRational::new(residue, pk)
        }
        _ => BigRational::zero(),
    }
}

/// Canonical representative of `x` modulo `p^m Z_p`: the digits of `x` at
/// positions strictly below `m`. Ball centers at resolution `m` are stored in
/// this form; two canonical representatives are equal iff the corresponding
/// balls of radius `p^{-m}` coincide.
pub fn canonical_mod(p: u64, m: i64, x: &BigRational) -> BigRational {
    fractional_part(p, &(x * prime_power(p, -m))) * prime_power(p, m)
}

/// Smallest p-power `p^j >= r` for `r > 0`, and `0` for `r = 0`.
/// The result never exceeds `p * r`.
///
/// Panics if `r` is negative (precondition).
pub fn round_up_to_value_group(p: u64, r: &BigRational) -> BigRational {
    assert!(!r.is_negative(), "round_up_to_value_group needs r >= 0");
    if r.is_zero() {
        return BigRational::zero();
    }
    let pq = BigRational::from_integer(BigInt::from(p));
    let mut pw = BigRational::one();
    if pw < *r {
        while pw < *r {
            pw *= &pq;
        }
    } else {
        loop {
            let smaller = &pw / &pq;
            if smaller >= *r {
                pw = smaller;
            } else {
                break;
            }
        }
    }
    pw
}

/// An exact scalar in `Q_p`: a rational number tagged with its prime.
///
/// Arithmetic between scalars with different primes is a programming error
/// and panics; division by zero is reported through [`PadicScalar::checked_div`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicScalar {
    p: u64,
    value: BigRational,
}

impl PadicScalar {
    pub fn new(p: u64, value: BigRational) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PadicScalar { p, value })
    }

    pub fn zero(p: u64) -> Self {
        PadicScalar {
            p,
            value: BigRational::zero(),
        }
    }

    pub fn one(p: u64) -> Self {
        PadicScalar {
            p,
            value: BigRational::one(),
        }
    }

    pub fn from_int(p: u64, x: i64) -> Self {
        PadicScalar {
            p,
            value: BigRational::from_integer(x.into()),
        }
    }

    pub fn from_ratio(p: u64, num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        PadicScalar::new(p, BigRational::new(num.into(), den.into()))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn valuation(&self) -> Valuation {
        rational_valuation(self.p, &self.value)
    }

    /// `|x|_p = p^{-v_p(x)}` as an exact rational.
    pub fn norm(&self) -> BigRational {
        rational_norm(self.p, &self.value)
    }

    /// See [`fractional_part`].
    pub fn fractional_part(&self) -> BigRational {
        fractional_part(self.p, &self.value)
    }

    fn assert_same_prime(&self, other: &Self) {
        assert_eq!(
            self.p, other.p,
            "p-adic scalars with different primes cannot be combined"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        PadicScalar {
            p: self.p,
            value: &self.value + &other.value,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        PadicScalar {
            p: self.p,
            value: &self.value - &other.value,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        PadicScalar {
            p: self.p,
            value: &self.value * &other.value,
        }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        self.assert_same_prime(other);
        if other.value.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(PadicScalar {
            p: self.p,
            value: &self.value / &other.value,
        })
    }

    pub fn neg(&self) -> Self {
        PadicScalar {
            p: self.p,
            value: -&self.value,
        }
    }

    pub fn scale(&self, w: &BigRational) -> Self {
        PadicScalar {
            p: self.p,
            value: &self.value * w,
        }
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (Q_{})", self.value, self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_from_str;

    fn q(s: &str) -> BigRational {
        rat_from_str(s).unwrap()
    }

    #[test]
    fn valuation_oracle_values() {
        // 50 = 2 * 5^2, so v_5(50) = 2.
        assert_eq!(
            rational_valuation(5, &q("50")),
            Valuation::Finite(2)
        );
        // v_2(7/4) = 0 - 2 = -2 and |7/4|_2 = 4.
        assert_eq!(rational_valuation(2, &q("7/4")), Valuation::Finite(-2));
        assert_eq!(rational_norm(2, &q("7/4")), q("4"));
        // Zero carries the infinite sentinel and norm 0.
        assert_eq!(rational_valuation(3, &q("0")), Valuation::Infinity);
        assert_eq!(rational_norm(3, &q("0")), q("0"));
    }

    #[test]
    fn valuation_ordering() {
        assert!(Valuation::Infinity > Valuation::Finite(i64::MAX));
        assert!(Valuation::Finite(-3) < Valuation::Finite(0));
        assert_eq!(Valuation::Infinity, Valuation::Infinity);
    }

    #[test]
    fn fractional_part_oracle_values() {
        // 1/2 = 0.1 in base 2: fractional part 1/2.
        assert_eq!(fractional_part(2, &q("1/2")), q("1/2"));
        // 7/4 = 1.11 in base 2: fractional part 3/4.
        assert_eq!(fractional_part(2, &q("7/4")), q("3/4"));
        // |5/3|_2 <= 1, so the fractional part vanishes.
        assert_eq!(fractional_part(2, &q("5/3")), q("0"));
        // Negative inputs still land in [0, 1): -1/2 - 1/2 = -1 is integral.
        assert_eq!(fractional_part(2, &q("-1/2")), q("1/2"));
        // 1/p for odd p.
        assert_eq!(fractional_part(3, &q("1/3")), q("1/3"));
        assert_eq!(fractional_part(5, &q("7/25")), q("7/25"));
        // Unit denominator coprime to p: 1/(3*4) at p=2 has v = -2;
        // 1/3 = 3^{-1} = 3 mod 4, so {1/12}_2 = 3/4.
        assert_eq!(fractional_part(2, &q("1/12")), q("3/4"));
    }

    #[test]
    fn fractional_part_leaves_integral_remainder() {
        for s in ["1/2", "7/4", "-9/8", "355/113", "13/40", "-1/6"] {
            for p in [2u64, 3, 5] {
                let y = q(s);
                let f = fractional_part(p, &y);
                // The remainder is a p-adic integer ...
                assert!(rational_valuation(p, &(&y - &f)) >= Valuation::Finite(0));
                // ... and the part itself sits in [0,1) with p-power denominator,
                // so its p-adic norm is exactly its denominator.
                assert!(f >= q("0") && f < q("1"));
                if !f.is_zero() {
                    assert_eq!(
                        rational_norm(p, &f),
                        BigRational::from_integer(f.denom().clone())
                    );
                }
            }
        }
    }

    #[test]
    fn fractional_part_additive_mod_one() {
        let cases = [
            ("1/2", "3/4"),
            ("7/8", "5/2"),
            ("-1/4", "1/4"),
            ("9/16", "3/8"),
        ];
        for (a, b) in cases {
            let (x, z) = (q(a), q(b));
            let lhs = fractional_part(2, &(&x + &z));
            let rhs = fractional_part(2, &x) + fractional_part(2, &z);
            let diff = lhs - rhs;
            assert!(diff.is_integer(), "difference must be an integer");
        }
    }

    #[test]
    fn canonical_mod_reduces_centers() {
        // 5 === 1 mod 2 Z_2.
        assert_eq!(canonical_mod(2, 1, &q("5")), q("1"));
        // 3/2 already has all digits below position 1.
        assert_eq!(canonical_mod(2, 1, &q("3/2")), q("3/2"));
        // Digits at or above m are stripped: 7/4 mod 2^0 Z_2 keeps 3/4.
        assert_eq!(canonical_mod(2, 0, &q("7/4")), q("3/4"));
        // Representatives differing by p^m Z_p coincide.
        assert_eq!(
            canonical_mod(3, 2, &q("10/3")),
            canonical_mod(3, 2, &(q("10/3") + q("18")))
        );
        assert_eq!(canonical_mod(5, 3, &q("0")), q("0"));
    }

    #[test]
    fn round_up_oracle_values() {
        assert_eq!(round_up_to_value_group(2, &q("3")), q("4"));
        assert_eq!(round_up_to_value_group(3, &q("1/4")), q("1/3"));
        assert_eq!(round_up_to_value_group(2, &q("4")), q("4"));
        assert_eq!(round_up_to_value_group(5, &q("0")), q("0"));
        assert_eq!(round_up_to_value_group(2, &q("1/5")), q("1/4"));
        // Guarantee: result <= p * r.
        for s in ["3", "1/4", "17/5", "1000", "1/1000"] {
            for p in [2u64, 3, 5] {
                let r = q(s);
                let up = round_up_to_value_group(p, &r);
                assert!(up >= r);
                assert!(up <= BigRational::from_integer(p.into()) * &r);
            }
        }
    }

    #[test]
    fn ultrametric_inequality() {
        let pairs = [
            ("3/4", "7/4"),
            ("1/2", "1/2"),
            ("8", "1/8"),
            ("5/6", "-5/6"),
        ];
        for (a, b) in pairs {
            let x = PadicScalar::new(2, q(a)).unwrap();
            let y = PadicScalar::new(2, q(b)).unwrap();
            let sum = x.add(&y);
            let max = x.norm().max(y.norm());
            assert!(sum.norm() <= max);
            if x.norm() != y.norm() {
                // Equality holds when the norms differ.
                assert_eq!(sum.norm(), max);
            }
        }
    }

    #[test]
    fn multiplicativity_and_division() {
        let x = PadicScalar::from_ratio(3, 6, 5).unwrap();
        let y = PadicScalar::from_ratio(3, 9, 2).unwrap();
        assert_eq!(x.mul(&y).norm(), x.norm() * y.norm());
        let z = x.checked_div(&y).unwrap();
        assert_eq!(z.mul(&y), x);
        assert_eq!(
            x.checked_div(&PadicScalar::zero(3)),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn mode_abs() {
        assert_eq!(Mode::Real.abs(&q("-3/4")), q("3/4"));
        // |1/8|_5 = 1: the weight's 5-adic size ignores powers of 2.
        assert_eq!(Mode::Sadic(5).abs(&q("1/8")), q("1"));
        assert_eq!(Mode::Sadic(5).abs(&q("50")), q("1/25"));
        assert!(Mode::Sadic(4).validate(2).is_err());
        assert!(Mode::Sadic(2).validate(2).is_err());
        assert!(Mode::Sadic(3).validate(2).is_ok());
    }

    #[test]
    fn rejects_non_prime() {
        assert_eq!(PadicScalar::new(6, q("1")), Err(Error::NotPrime(6)));
    }
}
