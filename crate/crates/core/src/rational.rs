//! Exact rational helpers shared across the crate: primality, prime powers,
//! and the canonical `"a/b"` string form used by every file format.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Trial-division primality test; inputs are desk-scale primes such as 2, 3, 5.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// `p^k` as an exact rational, for any integer exponent `k`.
pub fn prime_power(p: u64, k: i64) -> BigRational {
    let base = BigInt::from(p);
    if k >= 0 {
        BigRational::from_integer(base.pow(k as u32))
    } else {
        BigRational::new(BigInt::one(), base.pow((-k) as u32))
    }
}

/// Canonical string form of a rational: `"a/b"` in lowest terms with a
/// positive denominator, or just `"a"` when the denominator is one.
pub fn rat_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse the canonical string form accepted throughout the file formats.
pub fn rat_from_str(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim())
        .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
}

/// Exact conversion of a finite float into a rational. Fails on NaN/infinity.
pub fn rat_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::Parse(format!("non-finite float {x}")))
}

/// Nearest-double approximation of a rational, used only on reporting paths.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    num::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// Nonnegative-part check used by probability validations.
pub fn is_nonnegative(r: &BigRational) -> bool {
    !r.is_negative()
}

/// Sum of a slice of rationals.
pub fn rat_sum<'a>(it: impl IntoIterator<Item = &'a BigRational>) -> BigRational {
    it.into_iter().fold(BigRational::zero(), |a, b| a + b)
}
