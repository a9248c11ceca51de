//! Exact computational measure theory on the p-adic spaces `Q_p^n`.
//!
//! Everything downstream of the float-free constructors is exact: scalars are
//! rationals tagged with a prime, character sums live in cyclotomic rings
//! with rational coefficients, and measures are finite weighted families of
//! p-adic balls. Floats appear only in explicitly flagged approximation
//! paths (`complex_approx`, the radial Gaussian constructor) and always
//! travel with an error bound.

#![forbid(unsafe_code)]

pub mod characters;
pub mod error;
pub mod json;
pub mod kakutani;
pub mod linalg;
pub mod measures;
pub mod padic;
pub mod weak_dist;
pub mod rational;

pub use error::{Error, Result};
