//! Exact rational linear algebra for finite-rank perturbations of the
//! identity on `c_0(Q_p)`, and their Gaussian `S*C*D*E` decomposition.
//!
//! A [`PerturbationOperator`] is `A = I + F` where `F` is supported on the
//! leading `d x d` block; only that block is stored. [`gauss_decompose`]
//! produces a permutation `S`, a unit lower-triangular `C`, a diagonal `D`
//! and a unit upper-triangular `E` with `A = S*C*D*E` exactly, and
//! [`split_isometry`] factors `A = A1 * A2` with `A2` entrywise close to the
//! identity, hence an isometry with `|det A2|_p = 1`.

use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::padic::{rational_norm, PadicScalar};
use crate::rational::{is_prime, prime_power};

/// Dense matrix of exact rationals, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![BigRational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.get_mut(i, i) = BigRational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Misaligned("ragged matrix rows".into()));
        }
        Ok(RationalMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.cols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut BigRational {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<BigRational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.get_mut(j, i) = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = BigRational::zero();
                for k in 0..self.cols {
                    acc += self.get(i, k) * other.get(k, j);
                }
                *out.get_mut(i, j) = acc;
            }
        }
        Ok(out)
    }

    /// Matrix-vector product with exact rationals.
    pub fn apply(&self, v: &[BigRational]) -> Result<Vec<BigRational>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(self.cols, v.len()));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(BigRational::zero(), |acc, (a, x)| acc + a * x)
            })
            .collect())
    }

    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        let mut out = Self::zeros(row_idx.len(), col_idx.len());
        for (i, &r) in row_idx.iter().enumerate() {
            for (j, &c) in col_idx.iter().enumerate() {
                *out.get_mut(i, j) = self.get(r, c).clone();
            }
        }
        out
    }

    /// Exact determinant by fraction Gaussian elimination.
    pub fn determinant(&self) -> Result<BigRational> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(self.rows, self.cols));
        }
        let n = self.rows;
        let mut w = self.clone();
        let mut det = BigRational::one();
        for k in 0..n {
            if w.get(k, k).is_zero() {
                let Some(r) = (k + 1..n).find(|&r| !w.get(r, k).is_zero()) else {
                    return Ok(BigRational::zero());
                };
                w.swap_rows(k, r);
                det = -det;
            }
            let pivot = w.get(k, k).clone();
            det *= &pivot;
            for i in k + 1..n {
                let factor = w.get(i, k) / &pivot;
                if factor.is_zero() {
                    continue;
                }
                for j in k..n {
                    let delta = &factor * w.get(k, j);
                    *w.get_mut(i, j) -= delta;
                }
            }
        }
        Ok(det)
    }

    /// Determinant by cofactor expansion along the first row. Exponential;
    /// kept as an independent cross-check oracle for small blocks.
    pub fn cofactor_determinant(&self) -> Result<BigRational> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(self.rows, self.cols));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigRational::one());
        }
        if n == 1 {
            return Ok(self.get(0, 0).clone());
        }
        let rest_rows: Vec<usize> = (1..n).collect();
        let mut det = BigRational::zero();
        for j in 0..n {
            if self.get(0, j).is_zero() {
                continue;
            }
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = self.submatrix(&rest_rows, &cols).cofactor_determinant()?;
            let term = self.get(0, j) * minor;
            if j % 2 == 0 {
                det += term;
            } else {
                det -= term;
            }
        }
        Ok(det)
    }

    /// Exact inverse; errors on singular input.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(self.rows, self.cols));
        }
        let n = self.rows;
        let mut w = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            if w.get(k, k).is_zero() {
                let Some(r) = (k + 1..n).find(|&r| !w.get(r, k).is_zero()) else {
                    return Err(Error::SingularMatrix);
                };
                w.swap_rows(k, r);
                inv.swap_rows(k, r);
            }
            let pivot = w.get(k, k).clone();
            for j in 0..n {
                *w.get_mut(k, j) /= &pivot;
                *inv.get_mut(k, j) /= &pivot;
            }
            for i in 0..n {
                if i == k || w.get(i, k).is_zero() {
                    continue;
                }
                let factor = w.get(i, k).clone();
                for j in 0..n {
                    let dw = &factor * w.get(k, j);
                    *w.get_mut(i, j) -= dw;
                    let di = &factor * inv.get(k, j);
                    *inv.get_mut(i, j) -= di;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Largest p-adic norm among the entries of `self - I` (zero for empty).
    pub fn max_perturbation_norm(&self, p: u64) -> BigRational {
        let mut best = BigRational::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let delta = if i == j {
                    self.get(i, j) - BigRational::one()
                } else {
                    self.get(i, j).clone()
                };
                let norm = rational_norm(p, &delta);
                if norm > best {
                    best = norm;
                }
            }
        }
        best
    }
}

/// `A = I + F` on `c_0(Q_p)` with `F` supported on the leading `d x d`
/// block. The stored matrix is the leading block of `A` itself; beyond it
/// `A` acts as the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerturbationOperator {
    p: u64,
    block: RationalMatrix,
}

impl PerturbationOperator {
    /// Build from the leading block of `A`.
    pub fn from_leading_block(p: u64, block: RationalMatrix) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if block.rows() != block.cols() {
            return Err(Error::DimensionMismatch(block.rows(), block.cols()));
        }
        Ok(PerturbationOperator { p, block })
    }

    /// Build from the finite perturbation `F`, so the block is `I + F`.
    pub fn from_perturbation(p: u64, f: RationalMatrix) -> Result<Self> {
        let mut block = f;
        if block.rows() != block.cols() {
            return Err(Error::DimensionMismatch(block.rows(), block.cols()));
        }
        for i in 0..block.rows() {
            *block.get_mut(i, i) += BigRational::one();
        }
        Self::from_leading_block(p, block)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.block.rows()
    }

    /// Leading block of `A`.
    pub fn leading_block(&self) -> &RationalMatrix {
        &self.block
    }

    /// The finite perturbation `F = A - I` restricted to the block.
    pub fn perturbation(&self) -> RationalMatrix {
        let mut f = self.block.clone();
        for i in 0..f.rows() {
            *f.get_mut(i, i) -= BigRational::one();
        }
        f
    }

    /// `det A` (the identity tail contributes 1), tagged with the prime.
    pub fn det(&self) -> Result<PadicScalar> {
        PadicScalar::new(self.p, self.block.determinant()?)
    }

    pub fn is_invertible(&self) -> bool {
        self.block
            .determinant()
            .map(|d| !d.is_zero())
            .unwrap_or(false)
    }
}

/// Result of [`gauss_decompose`]: `A = S * C * D * E` exactly, where `S` is
/// the permutation sending basis vector `i` to `sigma[i]`, `C` is unit lower
/// triangular, `D` diagonal and `E` unit upper triangular (all restricted to
/// the block; every factor acts as the identity beyond it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub p: u64,
    /// Row `i` of the permuted matrix `S^{-1} A` is row `sigma[i]` of `A`.
    pub sigma: Vec<usize>,
    pub lower: RationalMatrix,
    pub diag: Vec<BigRational>,
    pub upper: RationalMatrix,
    /// `det A` (sign included).
    pub det: BigRational,
    /// Sign of the permutation `S`.
    pub sign: i8,
}

impl Decomposition {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_identity_permutation(&self) -> bool {
        self.sigma.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// Product of the diagonal entries: `det(S^{-1} A) = sign(S) * det(A)`.
    pub fn diag_product(&self) -> BigRational {
        self.diag
            .iter()
            .fold(BigRational::one(), |acc, d| acc * d)
    }

    /// The permutation matrix `S`.
    pub fn permutation_matrix(&self) -> RationalMatrix {
        let n = self.sigma.len();
        let mut s = RationalMatrix::zeros(n, n);
        for (i, &r) in self.sigma.iter().enumerate() {
            *s.get_mut(r, i) = BigRational::one();
        }
        s
    }

    /// Nontrivial cycles of the permutation, each rotated to start at its
    /// smallest element, listed in increasing order of that element.
    pub fn permutation_cycles(&self) -> Vec<Vec<usize>> {
        let n = self.sigma.len();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] || self.sigma[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.sigma[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.sigma[cur];
            }
            cycles.push(cycle);
        }
        cycles
    }

    /// `S * C * D * E`, for exactness checks.
    pub fn reconstruct(&self) -> Result<RationalMatrix> {
        let n = self.dim();
        let mut d = RationalMatrix::zeros(n, n);
        for i in 0..n {
            *d.get_mut(i, i) = self.diag[i].clone();
        }
        self.permutation_matrix()
            .mul(&self.lower)?
            .mul(&d)?
            .mul(&self.upper)
    }
}

/// Gaussian decomposition `A = S * C * D * E` of an invertible operator.
///
/// Elimination runs top-left to bottom-right. When a pivot vanishes — that
/// is, a leading minor of the current matrix is zero — the last row of the
/// offending leading block is replaced: scanning downward, the first later
/// row whose substitution gives a nonzero leading minor (equivalently, the
/// first nonzero Schur-complement entry in the pivot column) is swapped in,
/// and `S` records the swap. The smallest-index rule makes the permutation
/// deterministic. Diagonal entries are ratios of consecutive leading minors
/// of `S^{-1} A`, so `prod(D) = det(S^{-1} A) = sign(S) * det(A)`.
pub fn gauss_decompose(op: &PerturbationOperator) -> Result<Decomposition> {
    let n = op.dim();
    let mut w = op.leading_block().clone();
    let mut sigma: Vec<usize> = (0..n).collect();
    let mut sign = 1i8;
    for k in 0..n {
        if w.get(k, k).is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !w.get(r, k).is_zero()) else {
                return Err(Error::SingularMatrix);
            };
            w.swap_rows(k, r);
            sigma.swap(k, r);
            sign = -sign;
        }
        let pivot = w.get(k, k).clone();
        for i in k + 1..n {
            let factor = w.get(i, k) / &pivot;
            *w.get_mut(i, k) = factor.clone();
            if factor.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let delta = &factor * w.get(k, j);
                *w.get_mut(i, j) -= delta;
            }
        }
    }
    let mut lower = RationalMatrix::identity(n);
    let mut upper = RationalMatrix::identity(n);
    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        let d = w.get(k, k).clone();
        for i in k + 1..n {
            *lower.get_mut(i, k) = w.get(i, k).clone();
            *upper.get_mut(k, i) = w.get(k, i) / &d;
        }
        diag.push(d);
    }
    let det_permuted = diag
        .iter()
        .fold(BigRational::one(), |acc, d| acc * d);
    let det = if sign == 1 {
        det_permuted
    } else {
        -det_permuted
    };
    Ok(Decomposition {
        p: op.p(),
        sigma,
        lower,
        diag,
        upper,
        det,
        sign,
    })
}

/// Result of [`split_isometry`]: `A = A1 * A2` with `A1` differing from the
/// identity only in its leading `n x n` block and `A2` entrywise within `c`
/// of the identity, hence an isometry of `c_0(Q_p)` with `|det A2|_p = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsometrySplit {
    pub a1: PerturbationOperator,
    pub a2: PerturbationOperator,
    /// Size of the non-identity corner of `A1`.
    pub n: usize,
    /// `max_{ij} |(A2)_{ij} - delta_{ij}|_p`, certified `<= c`.
    pub max_deviation: BigRational,
    /// `|det A2|_p`, certified `= 1`.
    pub det_a2_norm: BigRational,
}

/// Split an invertible `A = A1 * A2` at threshold `c = p^{-t}`, `t >= 1`.
///
/// The corner size `n` is the smallest value for which the leading `n x n`
/// block of `A` is invertible and `A2 = A1^{-1} A` is entrywise within `c`
/// of the identity; `n = d` always qualifies (then `A2 = I`), so the split
/// exists for every invertible input. An operator entrywise within `c <= 1/p`
/// of the identity preserves every p-adic sup norm and its determinant is a
/// unit, which the returned certificate states exactly.
pub fn split_isometry(op: &PerturbationOperator, c: &BigRational) -> Result<IsometrySplit> {
    let p = op.p();
    // c must be a p-power with c <= 1/p.
    let valid = !c.is_zero()
        && !c.is_negative()
        && *c <= prime_power(p, -1)
        && match crate::padic::rational_valuation(p, c) {
            crate::padic::Valuation::Finite(v) => *c == prime_power(p, v) && v <= -1,
            crate::padic::Valuation::Infinity => false,
        };
    if !valid {
        return Err(Error::InvalidParameter(format!(
            "threshold {c} must be a power of {p} that is <= 1/{p}"
        )));
    }
    let d = op.dim();
    let block = op.leading_block();
    let full: Vec<usize> = (0..d).collect();
    for n in 0..=d {
        let idx = &full[..n];
        let corner = block.submatrix(idx, idx);
        let Ok(corner_inv) = corner.inverse() else {
            continue;
        };
        // A1 = corner (+) I; A1^{-1} A differs from A only in the first n rows.
        let mut a2 = block.clone();
        for i in 0..n {
            for j in 0..d {
                let mut acc = BigRational::zero();
                for k in 0..n {
                    acc += corner_inv.get(i, k) * block.get(k, j);
                }
                *a2.get_mut(i, j) = acc;
            }
        }
        let deviation = a2.max_perturbation_norm(p);
        if deviation <= *c {
            let mut a1 = RationalMatrix::identity(d);
            for i in 0..n {
                for j in 0..n {
                    *a1.get_mut(i, j) = corner.get(i, j).clone();
                }
            }
            let det_a2_norm = rational_norm(p, &a2.determinant()?);
            debug_assert!(det_a2_norm.is_one());
            return Ok(IsometrySplit {
                a1: PerturbationOperator::from_leading_block(p, a1)?,
                a2: PerturbationOperator::from_leading_block(p, a2)?,
                n,
                max_deviation: deviation,
                det_a2_norm,
            });
        }
    }
    Err(Error::SingularMatrix)
}

/// The bilinear form `sum_j z_j (A z)_j` over the finite support of `z`;
/// coordinates beyond the block contribute `z_j^2`.
pub fn quadratic_form(op: &PerturbationOperator, z: &[PadicScalar]) -> Result<PadicScalar> {
    let p = op.p();
    for zj in z {
        if zj.p() != p {
            return Err(Error::PrimeMismatch(p, zj.p()));
        }
    }
    let d = op.dim();
    let block = op.leading_block();
    let mut acc = BigRational::zero();
    for (j, zj) in z.iter().enumerate() {
        if j < d {
            let mut az = BigRational::zero();
            for (k, zk) in z.iter().enumerate().take(d) {
                az += block.get(j, k) * zk.value();
            }
            acc += zj.value() * az;
        } else {
            acc += zj.value() * zj.value();
        }
    }
    PadicScalar::new(p, acc)
}

/// `max_j |s_j|_p |z_j|_p^2` for a diagonal operator `diag(s)` extended by
/// the identity: the value-group size of the diagonal quadratic form.
pub fn diag_form_norm(p: u64, s: &[BigRational], z: &[PadicScalar]) -> Result<BigRational> {
    for zj in z {
        if zj.p() != p {
            return Err(Error::PrimeMismatch(p, zj.p()));
        }
    }
    let one = BigRational::one();
    let mut best = BigRational::zero();
    for (j, zj) in z.iter().enumerate() {
        let sj = s.get(j).unwrap_or(&one);
        let zn = zj.norm();
        let term = rational_norm(p, sj) * (&zn * &zn);
        if term > best {
            best = term;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_from_str;

    fn q(s: &str) -> BigRational {
        rat_from_str(s).unwrap()
    }

    fn mat(rows: &[&[&str]]) -> RationalMatrix {
        RationalMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|s| q(s)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn determinant_matches_cofactor_oracle() {
        let m = mat(&[
            &["1", "2", "3"],
            &["1/2", "-1", "0"],
            &["7", "0", "1/3"],
        ]);
        assert_eq!(m.determinant().unwrap(), m.cofactor_determinant().unwrap());
        // Frozen value computed by cofactor expansion:
        // 1*(-1/3 - 0) - 2*(1/6 - 0) + 3*(0 + 7) = -1/3 - 1/3 + 21 = 61/3.
        assert_eq!(m.determinant().unwrap(), q("61/3"));
    }

    #[test]
    fn inverse_round_trip() {
        let m = mat(&[&["2", "1"], &["3", "4"]]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv).unwrap(), RationalMatrix::identity(2));
        let singular = mat(&[&["1", "2"], &["2", "4"]]);
        assert_eq!(singular.inverse(), Err(Error::SingularMatrix));
    }

    #[test]
    fn decompose_symmetric_block() {
        // Leading block [[1,1],[1,1+p]] at p = 3: D = diag(1, 3), C lower
        // unit with C_{21} = 1, E = C^t, S = I.
        let op = PerturbationOperator::from_leading_block(
            3,
            mat(&[&["1", "1"], &["1", "4"]]),
        )
        .unwrap();
        let dec = gauss_decompose(&op).unwrap();
        assert!(dec.is_identity_permutation());
        assert_eq!(dec.diag, vec![q("1"), q("3")]);
        assert_eq!(dec.lower, mat(&[&["1", "0"], &["1", "1"]]));
        assert_eq!(dec.upper, dec.lower.transpose());
        assert_eq!(dec.reconstruct().unwrap(), *op.leading_block());
        assert_eq!(dec.det, q("3"));
    }

    #[test]
    fn decompose_needs_permutation() {
        // Leading 1x1 minor vanishes: S must swap basis vectors 0 and 1.
        let op = PerturbationOperator::from_leading_block(
            2,
            mat(&[&["0", "1"], &["1", "0"]]),
        )
        .unwrap();
        let dec = gauss_decompose(&op).unwrap();
        assert!(!dec.is_identity_permutation());
        assert_eq!(dec.permutation_cycles(), vec![vec![0, 1]]);
        assert_eq!(dec.reconstruct().unwrap(), *op.leading_block());
        // prod(D) = det(S^{-1} A) = sign * det(A).
        assert_eq!(dec.diag_product(), q("1"));
        assert_eq!(dec.det, q("-1"));
        assert_eq!(dec.sign, -1);
    }

    #[test]
    fn decompose_rejects_singular() {
        let op = PerturbationOperator::from_leading_block(
            2,
            mat(&[&["1", "2"], &["2", "4"]]),
        )
        .unwrap();
        assert_eq!(gauss_decompose(&op), Err(Error::SingularMatrix));
    }

    #[test]
    fn minor_formulas() {
        // Diagonal entries are ratios of consecutive leading minors, and the
        // triangular entries are the bordered-minor ratios.
        let op = PerturbationOperator::from_leading_block(
            5,
            mat(&[
                &["2", "1", "0"],
                &["1", "3", "1/5"],
                &["0", "1", "1"],
            ]),
        )
        .unwrap();
        let a = op.leading_block();
        let dec = gauss_decompose(&op).unwrap();
        assert!(dec.is_identity_permutation());
        let lead = |k: usize| {
            let idx: Vec<usize> = (0..k).collect();
            a.submatrix(&idx, &idx).cofactor_determinant().unwrap()
        };
        for j in 1..=3usize {
            assert_eq!(dec.diag[j - 1], lead(j) / lead(j - 1));
        }
        // C_{g,k} = A(1..k-1,g | 1..k) / A(1..k | 1..k), bordered rows.
        for k in 1..=3usize {
            for g in (k + 1)..=3usize {
                let mut rows: Vec<usize> = (0..k - 1).collect();
                rows.push(g - 1);
                let cols: Vec<usize> = (0..k).collect();
                let num = a.submatrix(&rows, &cols).cofactor_determinant().unwrap();
                assert_eq!(*dec.lower.get(g - 1, k - 1), num / lead(k));
            }
        }
        // E_{k,g} = A(1..k | 1..k-1,g) / A(1..k | 1..k), bordered columns.
        for k in 1..=3usize {
            for g in (k + 1)..=3usize {
                let rows: Vec<usize> = (0..k).collect();
                let mut cols: Vec<usize> = (0..k - 1).collect();
                cols.push(g - 1);
                let num = a.submatrix(&rows, &cols).cofactor_determinant().unwrap();
                assert_eq!(*dec.upper.get(k - 1, g - 1), num / lead(k));
            }
        }
    }

    #[test]
    fn split_small_perturbation_is_pure_isometry() {
        // All entries of A - I have norm <= 1/p: A1 = I, A2 = A at n = 0.
        let op = PerturbationOperator::from_perturbation(
            2,
            mat(&[&["2", "4"], &["0", "2"]]),
        )
        .unwrap();
        let split = split_isometry(&op, &q("1/2")).unwrap();
        assert_eq!(split.n, 0);
        assert_eq!(split.a1.leading_block(), &RationalMatrix::identity(2));
        assert_eq!(split.a2, op);
        assert!(split.max_deviation <= q("1/2"));
        assert!(split.det_a2_norm.is_one());
    }

    #[test]
    fn split_peels_large_corner() {
        // A = diag(1/4, 1) at p = 2: the unit entry 1/4 - 1 has norm 4, so
        // the corner n = 1 peels off and leaves the identity.
        let op = PerturbationOperator::from_leading_block(
            2,
            mat(&[&["1/4", "0"], &["0", "1"]]),
        )
        .unwrap();
        let split = split_isometry(&op, &q("1/2")).unwrap();
        assert_eq!(split.n, 1);
        assert_eq!(split.a2.leading_block(), &RationalMatrix::identity(2));
        assert_eq!(
            split
                .a1
                .leading_block()
                .mul(split.a2.leading_block())
                .unwrap(),
            *op.leading_block()
        );
    }

    #[test]
    fn split_validates_threshold() {
        let op = PerturbationOperator::from_leading_block(2, RationalMatrix::identity(1))
            .unwrap();
        assert!(split_isometry(&op, &q("1")).is_err());
        assert!(split_isometry(&op, &q("1/3")).is_err());
        assert!(split_isometry(&op, &q("0")).is_err());
        assert!(split_isometry(&op, &q("1/4")).is_ok());
    }

    #[test]
    fn quadratic_form_and_diag_norm() {
        let p = 3;
        let s = [q("3"), q("1/3")];
        let mut block = RationalMatrix::zeros(2, 2);
        *block.get_mut(0, 0) = s[0].clone();
        *block.get_mut(1, 1) = s[1].clone();
        let op = PerturbationOperator::from_leading_block(p, block).unwrap();
        let z = [
            PadicScalar::from_ratio(p, 1, 3).unwrap(),
            PadicScalar::from_int(p, 2),
        ];
        // q(z) = 3*(1/3)^2 + (1/3)*4 = 1/3 + 4/3 = 5/3.
        let form = quadratic_form(&op, &z).unwrap();
        assert_eq!(form.value(), &q("5/3"));
        // |s_1||z_1|^2 = (1/3)*9 = 3, |s_2||z_2|^2 = 3*1 = 3: max is 3 and
        // the ultrametric bound |q(z)| <= max holds with equality ambiguous.
        let bound = diag_form_norm(p, &s, &z).unwrap();
        assert_eq!(bound, q("3"));
        assert!(form.norm() <= bound);
        // Unique maximum: equality.
        let z2 = [
            PadicScalar::from_ratio(p, 1, 3).unwrap(),
            PadicScalar::from_int(p, 3),
        ];
        let form2 = quadratic_form(&op, &z2).unwrap();
        assert_eq!(form2.norm(), diag_form_norm(p, &s, &z2).unwrap());
    }

    #[test]
    fn identity_tail_contributes_squares() {
        let op = PerturbationOperator::from_leading_block(2, RationalMatrix::identity(1))
            .unwrap();
        let z = [
            PadicScalar::from_int(2, 3),
            PadicScalar::from_ratio(2, 1, 2).unwrap(),
        ];
        // 3^2 + (1/2)^2 = 37/4.
        assert_eq!(quadratic_form(&op, &z).unwrap().value(), &q("37/4"));
    }
}
