//! Locally constant measures on `Q_p^n` as weighted ball partitions.
//!
//! A [`BallMeasure`] stores finitely many disjoint balls of radius `p^{-m}`
//! ("cells", identified by canonical centers) with nonzero rational weights.
//! It represents a measure on the algebra generated by those cells; values
//! on finer sets are undefined unless the measure carries the
//! `uniformly_refinable` flag, which asserts that on each cell the measure
//! is a multiple of Haar measure, so a cell may split into `p^n` equal
//! subcells. All arithmetic is exact; the only floating-point entry point is
//! [`radial_gaussian`], which reports explicit deviation bounds.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::characters::{CyclotomicElement, RootOfUnity};
use crate::error::{Error, Result};
use crate::linalg::RationalMatrix;
use crate::padic::{
    canonical_mod, fractional_part, rational_norm, rational_valuation, Mode, PadicScalar,
    ValueScalar, Valuation,
};
use crate::rational::{is_prime, prime_power, rat_sum, rat_to_f64};

/// Hard ceiling on the number of cells any operation may materialize.
pub const CELL_CAP: usize = 1 << 20;

fn check_cell_budget(count: &BigInt, what: &str) -> Result<()> {
    if *count > BigInt::from(CELL_CAP) {
        return Err(Error::CapExceeded(format!(
            "{what} would need {count} cells (cap {CELL_CAP})"
        )));
    }
    Ok(())
}

/// Iterate all vectors in `[0, radix)^len` in lexicographic order.
pub fn digit_vectors(radix: u64, len: usize) -> impl Iterator<Item = Vec<u64>> {
    let mut state: Option<Vec<u64>> = Some(vec![0; len]);
    let mut first = true;
    std::iter::from_fn(move || {
        let cur = state.as_mut()?;
        if first {
            first = false;
            return Some(cur.clone());
        }
        for d in cur.iter_mut().rev() {
            *d += 1;
            if *d < radix {
                return Some(cur.clone());
            }
            *d = 0;
        }
        state = None;
        None
    })
}

/// A finite union of balls `B(c, p^{-j})`; the building blocks of the
/// clopen compact sets the measures are defined on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClopenSet {
    p: u64,
    n: usize,
    /// Each ball as (canonical center at its own radius exponent, exponent).
    balls: Vec<(Vec<BigRational>, i64)>,
}

impl ClopenSet {
    pub fn empty(p: u64, n: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(ClopenSet {
            p,
            n,
            balls: Vec::new(),
        })
    }

    /// Union of the given balls, each a `(center, j)` pair describing
    /// `B(center, p^{-j})`. Centers are canonicalized mod `p^j`.
    pub fn from_balls(
        p: u64,
        n: usize,
        balls: impl IntoIterator<Item = (Vec<BigRational>, i64)>,
    ) -> Result<Self> {
        let mut set = Self::empty(p, n)?;
        for (center, j) in balls {
            if center.len() != n {
                return Err(Error::DimensionMismatch(n, center.len()));
            }
            let canon: Vec<BigRational> =
                center.iter().map(|c| canonical_mod(p, j, c)).collect();
            if !set.balls.contains(&(canon.clone(), j)) {
                set.balls.push((canon, j));
            }
        }
        Ok(set)
    }

    pub fn ball(p: u64, center: Vec<BigRational>, j: i64) -> Result<Self> {
        let n = center.len();
        Self::from_balls(p, n, [(center, j)])
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn balls(&self) -> &[(Vec<BigRational>, i64)] {
        &self.balls
    }

    /// Finest ball scale in the set (`None` when empty).
    pub fn max_scale(&self) -> Option<i64> {
        self.balls.iter().map(|(_, j)| *j).max()
    }

    pub fn contains(&self, x: &[BigRational]) -> Result<bool> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, x.len()));
        }
        Ok(self.balls.iter().any(|(c, j)| {
            c.iter()
                .zip(x)
                .all(|(cj, xj)| *cj == canonical_mod(self.p, *j, xj))
        }))
    }
}

/// A function constant on every ball of radius `p^{-m}`: an explicit value
/// map on cell centers plus a default value off the listed support.
#[derive(Clone, Debug, PartialEq)]
pub struct LocallyConstantFn<V> {
    p: u64,
    n: usize,
    m: i64,
    values: BTreeMap<Vec<BigRational>, V>,
    default: V,
}

impl<V: Clone> LocallyConstantFn<V> {
    pub fn constant(p: u64, n: usize, m: i64, value: V) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(LocallyConstantFn {
            p,
            n,
            m,
            values: BTreeMap::new(),
            default: value,
        })
    }

    /// Build from explicit cell values; keys are canonicalized and must not
    /// collide afterwards (two names for one cell would be ambiguous).
    pub fn from_values(
        p: u64,
        n: usize,
        m: i64,
        values: impl IntoIterator<Item = (Vec<BigRational>, V)>,
        default: V,
    ) -> Result<Self> {
        let mut f = Self::constant(p, n, m, default)?;
        for (center, v) in values {
            if center.len() != n {
                return Err(Error::DimensionMismatch(n, center.len()));
            }
            let canon: Vec<BigRational> =
                center.iter().map(|c| canonical_mod(p, m, c)).collect();
            if f.values.insert(canon, v).is_some() {
                return Err(Error::Misaligned(
                    "duplicate cell in locally constant function".into(),
                ));
            }
        }
        Ok(f)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn evaluate(&self, x: &[BigRational]) -> Result<V> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, x.len()));
        }
        let canon: Vec<BigRational> =
            x.iter().map(|c| canonical_mod(self.p, self.m, c)).collect();
        Ok(self.values.get(&canon).unwrap_or(&self.default).clone())
    }

    /// The explicitly stored (canonical center, value) pairs; everywhere
    /// else the function takes [`Self::default_value`].
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<BigRational>, &V)> {
        self.values.iter()
    }

    pub fn default_value(&self) -> &V {
        &self.default
    }
}

impl LocallyConstantFn<BigRational> {
    /// Indicator of a clopen set, materialized on cells of radius `p^{-m}`.
    /// Every ball in the set must be no finer than that resolution.
    pub fn indicator(set: &ClopenSet, m: i64) -> Result<Self> {
        let p = set.p();
        let mut cells = BTreeMap::new();
        for (center, j) in set.balls() {
            if *j > m {
                return Err(Error::Misaligned(format!(
                    "ball at scale {j} is finer than function resolution {m}"
                )));
            }
            let delta = (m - j) as u32;
            let subcells = BigInt::from(p).pow(delta * set.n() as u32);
            check_cell_budget(&(subcells + BigInt::from(cells.len())), "indicator")?;
            let step = prime_power(p, *j);
            let radix = BigInt::from(p)
                .pow(delta)
                .to_u64()
                .expect("subcell radix fits after budget check");
            for t in digit_vectors(radix, set.n()) {
                let sub: Vec<BigRational> = center
                    .iter()
                    .zip(&t)
                    .map(|(c, tj)| c + &step * BigRational::from_integer(BigInt::from(*tj)))
                    .collect();
                cells.insert(sub, BigRational::one());
            }
        }
        LocallyConstantFn::from_values(p, set.n(), m, cells, BigRational::zero())
    }
}

/// Value types that can be accumulated by [`BallMeasure::integrate`]:
/// rationals, p-adic scalars, and cyclotomic field elements.
pub trait IntegrandValue: Clone {
    fn zero_value(p: u64) -> Self;
    fn add_value(self, other: &Self) -> Self;
    fn scale_value(&self, w: &BigRational) -> Self;
}

impl IntegrandValue for BigRational {
    fn zero_value(_p: u64) -> Self {
        BigRational::zero()
    }

    fn add_value(self, other: &Self) -> Self {
        self + other
    }

    fn scale_value(&self, w: &BigRational) -> Self {
        self * w
    }
}

impl IntegrandValue for PadicScalar {
    fn zero_value(p: u64) -> Self {
        PadicScalar::zero(p)
    }

    fn add_value(self, other: &Self) -> Self {
        self.add(other)
    }

    fn scale_value(&self, w: &BigRational) -> Self {
        self.scale(w)
    }
}

impl IntegrandValue for CyclotomicElement {
    fn zero_value(p: u64) -> Self {
        CyclotomicElement::zero(p)
    }

    fn add_value(self, other: &Self) -> Self {
        self.add(other)
    }

    fn scale_value(&self, w: &BigRational) -> Self {
        self.scale(w)
    }
}

/// A measure on `Q_p^n` known on the algebra generated by balls of radius
/// `p^{-m}`: finitely many cells (canonical centers) with nonzero weights.
///
/// Equality compares the measure data (`p`, `n`, `m`, mode, cells); the
/// `uniformly_refinable` flag is advisory and excluded, since it asserts a
/// property of the underlying measure rather than of the stored data.
#[derive(Clone, Debug)]
pub struct BallMeasure {
    p: u64,
    n: usize,
    m: i64,
    mode: Mode,
    refinable: bool,
    cells: BTreeMap<Vec<BigRational>, BigRational>,
}

impl PartialEq for BallMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.n == other.n
            && self.m == other.m
            && self.mode == other.mode
            && self.cells == other.cells
    }
}

impl Eq for BallMeasure {}

impl BallMeasure {
    fn validated_shell(p: u64, n: usize, m: i64, mode: Mode, refinable: bool) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        mode.validate(p)?;
        Ok(BallMeasure {
            p,
            n,
            m,
            mode,
            refinable,
            cells: BTreeMap::new(),
        })
    }

    /// Build from raw `(center, weight)` pairs. Centers are canonicalized
    /// mod `p^m`; weights of coinciding cells are added and zero totals are
    /// dropped. The `refinable` flag is the caller's assertion that the
    /// measure is a Haar multiple on every cell.
    pub fn from_cells(
        p: u64,
        n: usize,
        m: i64,
        mode: Mode,
        refinable: bool,
        cells: impl IntoIterator<Item = (Vec<BigRational>, BigRational)>,
    ) -> Result<Self> {
        let mut mu = Self::validated_shell(p, n, m, mode, refinable)?;
        for (center, w) in cells {
            if center.len() != n {
                return Err(Error::DimensionMismatch(n, center.len()));
            }
            let canon: Vec<BigRational> =
                center.iter().map(|c| canonical_mod(p, m, c)).collect();
            let entry = mu.cells.entry(canon).or_insert_with(BigRational::zero);
            *entry += w;
        }
        mu.cells.retain(|_, w| !w.is_zero());
        Ok(mu)
    }

    /// Dirac measure at `point`, represented at resolution `m`. Not
    /// refinable: within its cell the mass sits at one point, not uniformly.
    pub fn dirac(p: u64, m: i64, mode: Mode, point: &[BigRational]) -> Result<Self> {
        let n = point.len();
        Self::from_cells(p, n, m, mode, false, [(point.to_vec(), BigRational::one())])
    }

    /// Normalized Haar measure on `Z_p^n`, represented at resolution
    /// `m >= 0` by `p^{mn}` cells of equal weight. Uniformly refinable.
    pub fn haar_unit(p: u64, n: usize, m: i64, mode: Mode) -> Result<Self> {
        if m < 0 {
            return Err(Error::InvalidParameter(
                "unit-ball Haar measure needs resolution m >= 0".into(),
            ));
        }
        let mut mu = Self::validated_shell(p, n, m, mode, true)?;
        let count = BigInt::from(p).pow(m as u32 * n as u32);
        check_cell_budget(&count, "unit-ball Haar measure")?;
        let radix = BigInt::from(p)
            .pow(m as u32)
            .to_u64()
            .expect("cell radix fits after budget check");
        let weight = prime_power(p, -m * n as i64);
        for k in digit_vectors(radix, n) {
            let center: Vec<BigRational> = k
                .iter()
                .map(|kj| BigRational::from_integer(BigInt::from(*kj)))
                .collect();
            mu.cells.insert(center, weight.clone());
        }
        Ok(mu)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    /// Whether the measure is locally uniform on each cell, licensing
    /// refinement to finer resolutions.
    pub fn refinable(&self) -> bool {
        self.refinable
    }

    pub fn is_refinable(&self) -> bool {
        self.refinable
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&Vec<BigRational>, &BigRational)> {
        self.cells.iter()
    }

    /// Weight of the cell containing `x` (zero off support).
    pub fn weight_at(&self, x: &[BigRational]) -> Result<BigRational> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, x.len()));
        }
        let canon: Vec<BigRational> =
            x.iter().map(|c| canonical_mod(self.p, self.m, c)).collect();
        Ok(self.cells.get(&canon).cloned().unwrap_or_else(BigRational::zero))
    }

    /// Total mass `mu(Q_p^n)`.
    pub fn mass(&self) -> BigRational {
        rat_sum(self.cells.values())
    }

    /// Measure norm: total variation `sum |w_i|` in real mode, `max |w_i|_s`
    /// in s-adic mode (attained, by finiteness; zero for the zero measure).
    pub fn norm(&self) -> BigRational {
        match self.mode {
            Mode::Real => self.cells.values().map(|w| w.abs()).sum(),
            Mode::Sadic(_) => self
                .cells
                .values()
                .map(|w| self.mode.abs(w))
                .max()
                .unwrap_or_else(BigRational::zero),
        }
    }

    /// Pointwise norm `N(mu, x)`: the mode absolute value of the weight of
    /// the cell containing `x`.
    pub fn pointwise_norm(&self, x: &[BigRational]) -> Result<BigRational> {
        Ok(self.mode.abs(&self.weight_at(x)?))
    }

    /// Probability test: real mode needs nonnegative weights of total 1;
    /// s-adic mode needs total 1 and norm `max |w_i|_s = 1`.
    pub fn is_probability(&self) -> bool {
        if !self.mass().is_one() {
            return false;
        }
        match self.mode {
            Mode::Real => self.cells.values().all(|w| w.is_positive()),
            Mode::Sadic(_) => self.norm().is_one(),
        }
    }

    /// Measure of a clopen set: the sum of weights of the cells it covers.
    /// Balls finer than the resolution require the refinable flag.
    pub fn measure_of(&self, set: &ClopenSet) -> Result<ValueScalar> {
        if set.p() != self.p {
            return Err(Error::PrimeMismatch(self.p, set.p()));
        }
        if set.n() != self.n {
            return Err(Error::DimensionMismatch(self.n, set.n()));
        }
        let needed = set.max_scale().unwrap_or(self.m).max(self.m);
        let fine = self.refine_to(needed)?;
        let mut total = BigRational::zero();
        for (center, w) in &fine.cells {
            if set.contains(center)? {
                total += w;
            }
        }
        Ok(ValueScalar::new(total, self.mode.clone()))
    }

    /// Re-express the measure on cells of radius `p^{-target}`, `target >=
    /// m`. A strict refinement splits every cell into equal-weight subcells
    /// and is only legal for uniformly refinable measures; the stored data
    /// does not determine finer values otherwise.
    pub fn refine_to(&self, target: i64) -> Result<Self> {
        if target == self.m {
            return Ok(self.clone());
        }
        if target < self.m {
            return Err(Error::ResolutionViolation(format!(
                "cannot coarsen from resolution {} to {}",
                self.m, target
            )));
        }
        if !self.refinable {
            return Err(Error::ResolutionViolation(format!(
                "measure at resolution {} is not uniformly refinable; cannot answer at {}",
                self.m, target
            )));
        }
        let delta = (target - self.m) as u32;
        let per_cell = BigInt::from(self.p).pow(delta * self.n as u32);
        check_cell_budget(
            &(per_cell.clone() * BigInt::from(self.cells.len())),
            "refinement",
        )?;
        let radix = BigInt::from(self.p)
            .pow(delta)
            .to_u64()
            .expect("subcell radix fits after budget check");
        let step = prime_power(self.p, self.m);
        let share = prime_power(self.p, -(delta as i64) * self.n as i64);
        let mut out = Self::validated_shell(self.p, self.n, target, self.mode.clone(), true)?;
        for (center, w) in &self.cells {
            let sub_w = w * &share;
            for t in digit_vectors(radix, self.n) {
                let sub: Vec<BigRational> = center
                    .iter()
                    .zip(&t)
                    .map(|(c, tj)| c + &step * BigRational::from_integer(BigInt::from(*tj)))
                    .collect();
                out.cells.insert(sub, sub_w.clone());
            }
        }
        Ok(out)
    }

    /// Exact integral `sum_i f(c_i) w_i` of a locally constant function.
    /// The function may be coarser than the measure; a strictly finer one
    /// forces a refinement (hence the refinable flag).
    pub fn integrate<V: IntegrandValue>(&self, f: &LocallyConstantFn<V>) -> Result<V> {
        if f.p() != self.p {
            return Err(Error::PrimeMismatch(self.p, f.p()));
        }
        if f.n() != self.n {
            return Err(Error::DimensionMismatch(self.n, f.n()));
        }
        let aligned = if f.m() > self.m {
            self.refine_to(f.m())?
        } else {
            self.clone()
        };
        let mut acc = V::zero_value(self.p);
        for (center, w) in &aligned.cells {
            let v = f.evaluate(center)?;
            acc = acc.add_value(&v.scale_value(w));
        }
        Ok(acc)
    }

    fn dot(&self, z: &[PadicScalar], center: &[BigRational]) -> Result<BigRational> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, z.len()));
        }
        let mut acc = BigRational::zero();
        for (zj, cj) in z.iter().zip(center) {
            if zj.p() != self.p {
                return Err(Error::PrimeMismatch(self.p, zj.p()));
            }
            acc += zj.value() * cj;
        }
        Ok(acc)
    }

    /// Whether the character `x -> chi(z . x)` is constant on every cell,
    /// i.e. `max_j |z_j|_p <= p^m`.
    pub fn is_admissible(&self, z: &[PadicScalar]) -> bool {
        z.len() == self.n
            && z.iter().all(|zj| {
                zj.p() == self.p && zj.valuation() >= Valuation::Finite(-self.m)
            })
    }

    /// Fourier–Stieltjes transform `theta(z) = integral of chi(z . x)`,
    /// exact in the cyclotomic field. Defined for admissible `z` (then the
    /// integrand is cell-constant); beyond that a refinable measure still
    /// has an exact answer — after refining to where `z` is admissible, the
    /// subcell character sums cancel in full cycles — namely zero, while a
    /// non-refinable measure cannot answer and errors.
    pub fn fourier_stieltjes(&self, z: &[PadicScalar]) -> Result<CyclotomicElement> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, z.len()));
        }
        for zj in z {
            if zj.p() != self.p {
                return Err(Error::PrimeMismatch(self.p, zj.p()));
            }
        }
        if !self.is_admissible(z) {
            if self.refinable {
                return Ok(CyclotomicElement::zero(self.p));
            }
            return Err(Error::ResolutionViolation(format!(
                "|z| exceeds p^{} and the measure is not refinable",
                self.m
            )));
        }
        let mut acc = CyclotomicElement::zero(self.p);
        for (center, w) in &self.cells {
            let angle = fractional_part(self.p, &self.dot(z, center)?);
            let root = RootOfUnity::new(self.p, angle)?;
            acc = acc.add(&root.to_cyclotomic().scale(w));
        }
        Ok(acc)
    }

    /// Convolution. Resolutions are unified upward to `max(m1, m2)` (the
    /// coarser side must be refinable if they differ), then cells add:
    /// `B(x, r) + B(y, r) = B(x + y, r)`. The result is refinable when
    /// either input is: convolving with a fixed translate preserves local
    /// Haar pieces, and mixtures of locally Haar measures stay locally Haar.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.compat(other)?;
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let target = self.m.max(other.m);
        let a = self.refine_to(target)?;
        let b = other.refine_to(target)?;
        check_cell_budget(
            &(BigInt::from(a.cells.len()) * BigInt::from(b.cells.len())),
            "convolution",
        )?;
        let mut out = Self::validated_shell(
            self.p,
            self.n,
            target,
            self.mode.clone(),
            a.refinable || b.refinable,
        )?;
        for (c1, w1) in &a.cells {
            for (c2, w2) in &b.cells {
                let sum: Vec<BigRational> = c1
                    .iter()
                    .zip(c2)
                    .map(|(x, y)| canonical_mod(self.p, target, &(x + y)))
                    .collect();
                let entry = out.cells.entry(sum).or_insert_with(BigRational::zero);
                *entry += w1 * w2;
            }
        }
        out.cells.retain(|_, w| !w.is_zero());
        Ok(out)
    }

    /// Product measure on `Q_p^{n1+n2}`: cells are concatenated centers,
    /// weights multiply. Resolutions are unified upward first; the product
    /// is locally Haar only when both factors are.
    pub fn product_measure(&self, other: &Self) -> Result<Self> {
        self.compat(other)?;
        let target = self.m.max(other.m);
        let a = self.refine_to(target)?;
        let b = other.refine_to(target)?;
        check_cell_budget(
            &(BigInt::from(a.cells.len()) * BigInt::from(b.cells.len())),
            "product measure",
        )?;
        let mut out = Self::validated_shell(
            self.p,
            self.n + other.n,
            target,
            self.mode.clone(),
            a.refinable && b.refinable,
        )?;
        for (c1, w1) in &a.cells {
            for (c2, w2) in &b.cells {
                let mut center = c1.clone();
                center.extend_from_slice(c2);
                out.cells.insert(center, w1 * w2);
            }
        }
        Ok(out)
    }

    /// Image measure under the linear map `x -> T x` (`T` is `k x n` with
    /// rational entries). The output resolution is
    /// `m' = m + min_i min_{j, T_ij != 0} v_p(T_ij)`, the finest scale at
    /// which every input cell lands inside a single output cell; rows of
    /// zeros are exact and impose no constraint. Colliding images add and
    /// cancellations are dropped. Refinability survives only when `T` is a
    /// `GL_n(Z_p)` matrix (integral entries, unit determinant), which maps
    /// cells bijectively onto cells.
    pub fn pushforward(&self, t: &RationalMatrix) -> Result<Self> {
        if t.cols() != self.n {
            return Err(Error::DimensionMismatch(self.n, t.cols()));
        }
        let k = t.rows();
        if k == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let mut shift: Option<i64> = None;
        for i in 0..k {
            let row_min = (0..self.n)
                .filter_map(|j| match rational_valuation(self.p, t.get(i, j)) {
                    Valuation::Finite(v) => Some(v),
                    Valuation::Infinity => None,
                })
                .min();
            if let Some(v) = row_min {
                shift = Some(shift.map_or(v, |s| s.min(v)));
            }
        }
        let m_out = self.m + shift.unwrap_or(0);
        let square_unit = k == self.n
            && (0..k).all(|i| {
                (0..self.n).all(|j| rational_valuation(self.p, t.get(i, j)) >= Valuation::Finite(0))
            })
            && t.determinant().map(|d| rational_norm(self.p, &d).is_one()) == Ok(true);
        let mut out = Self::validated_shell(
            self.p,
            k,
            m_out,
            self.mode.clone(),
            self.refinable && square_unit,
        )?;
        for (center, w) in &self.cells {
            let image = t.apply(center)?;
            let canon: Vec<BigRational> = image
                .iter()
                .map(|c| canonical_mod(self.p, m_out, c))
                .collect();
            let entry = out.cells.entry(canon).or_insert_with(BigRational::zero);
            *entry += w;
        }
        out.cells.retain(|_, w| !w.is_zero());
        Ok(out)
    }

    /// Marginal onto the given coordinates (nonempty, strictly increasing).
    /// Keeps the resolution and the refinable flag: integrating out
    /// coordinates of a local Haar piece leaves a local Haar piece.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("empty coordinate list".into()));
        }
        if coords.windows(2).any(|w| w[0] >= w[1]) || *coords.last().unwrap() >= self.n {
            return Err(Error::InvalidParameter(format!(
                "marginal coordinates must be strictly increasing and < {}",
                self.n
            )));
        }
        let mut out = Self::validated_shell(
            self.p,
            coords.len(),
            self.m,
            self.mode.clone(),
            self.refinable,
        )?;
        for (center, w) in &self.cells {
            let proj: Vec<BigRational> = coords.iter().map(|&j| center[j].clone()).collect();
            let entry = out.cells.entry(proj).or_insert_with(BigRational::zero);
            *entry += w;
        }
        out.cells.retain(|_, w| !w.is_zero());
        Ok(out)
    }

    /// Reflection through the origin: cell centers negate (canonically),
    /// weights carry over.
    pub fn negate(&self) -> Self {
        let mut out =
            Self::validated_shell(self.p, self.n, self.m, self.mode.clone(), self.refinable)
                .expect("shell parameters already validated");
        for (center, w) in &self.cells {
            let neg: Vec<BigRational> = center
                .iter()
                .map(|c| canonical_mod(self.p, self.m, &-c))
                .collect();
            out.cells.insert(neg, w.clone());
        }
        out
    }

    /// Whether `mu(-B) = mu(B)` on the cell algebra.
    pub fn is_symmetric(&self) -> bool {
        *self == self.negate()
    }

    /// Weak moment of integer order `q >= 1` along `z`: the exact pairing
    /// `sum_i |z . c_i|_p^q w_i`, together with a truncation error bound.
    /// On "suspect" cells — those with `|z . c| <= max_j |z_j| p^{-m}`,
    /// always including the zero cell — the integrand is not cell-constant;
    /// each contributes at most `(max_j |z_j| p^{-m})^q` times its mass to
    /// the deviation from the true integral. Real mode with nonnegative
    /// weights only: a signed cell hides unbounded variation, and the
    /// s-adic theory has no weak moments.
    pub fn weak_q_moment(
        &self,
        z: &[PadicScalar],
        q: u32,
    ) -> Result<(BigRational, BigRational)> {
        if self.mode != Mode::Real {
            return Err(Error::ModeMismatch);
        }
        if q == 0 {
            return Err(Error::InvalidParameter("moment order must be >= 1".into()));
        }
        if self.cells.values().any(|w| w.is_negative()) {
            return Err(Error::InvalidParameter(
                "weak moments need a nonnegative measure".into(),
            ));
        }
        let zmax = z
            .iter()
            .map(PadicScalar::norm)
            .max()
            .unwrap_or_else(BigRational::zero);
        let eps = zmax * prime_power(self.p, -self.m);
        let mut value = BigRational::zero();
        let mut suspect_mass = BigRational::zero();
        for (center, w) in &self.cells {
            let norm = rational_norm(self.p, &self.dot(z, center)?);
            if norm <= eps {
                suspect_mass += w;
            }
            value += norm.pow(q as i32) * w;
        }
        let bound = eps.pow(q as i32) * suspect_mass;
        Ok((value, bound))
    }

    /// The finite set of transform arguments that determine the measure:
    /// `z = k p^{-m}` with `k_j` ranging over `[0, p^{m-v})`, where `p^v` is
    /// the coarsest lattice containing every center. Restricted to it, the
    /// transform is a full discrete Fourier transform on the finite group
    /// (support lattice)/(cell lattice), which is invertible, so distinct
    /// measures at this resolution differ somewhere on the list.
    pub fn admissible_lattice(&self, cap: usize) -> Result<Vec<Vec<BigRational>>> {
        let v = self
            .cells
            .keys()
            .flatten()
            .filter_map(|c| match rational_valuation(self.p, c) {
                Valuation::Finite(v) => Some(v),
                Valuation::Infinity => None,
            })
            .min()
            .unwrap_or(self.m)
            .min(self.m);
        let width = (self.m - v) as u32;
        let count = BigInt::from(self.p).pow(width * self.n as u32);
        if count > BigInt::from(cap) {
            return Err(Error::CapExceeded(format!(
                "transform lattice has {count} points (cap {cap})"
            )));
        }
        let radix = BigInt::from(self.p)
            .pow(width)
            .to_u64()
            .expect("lattice radix fits after cap check");
        let step = prime_power(self.p, -self.m);
        Ok(digit_vectors(radix, self.n)
            .map(|k| {
                k.iter()
                    .map(|kj| &step * BigRational::from_integer(BigInt::from(*kj)))
                    .collect()
            })
            .collect())
    }

    fn compat(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        if self.mode != other.mode {
            return Err(Error::ModeMismatch);
        }
        Ok(())
    }
}

/// A radially constant approximation to a Gaussian-like measure, built from
/// the density `exp(-|x xi|^2)`: the sole floating-point constructor in the
/// crate. Total mass is normalized to exactly 1; the reported bounds say how
/// far the cell weights may sit from the untruncated measure.
#[derive(Clone, Debug)]
pub struct RadialGaussian {
    pub measure: BallMeasure,
    /// Weight of the cell at the origin (the whole ball `|x| <= p^{l_min}`).
    pub zero_cell_weight: BigRational,
    /// Relative mass of the discarded spheres `|x| = p^l`, `l > l_max`.
    pub outer_tail: f64,
}

impl RadialGaussian {
    /// For any cell-aligned `f`: `|integral of f - f(0)| <=` this bound,
    /// with `sup_f` an upper bound for `|f|`. The integral differs from
    /// `f(0)` only through mass off the zero cell and the discarded tail.
    pub fn dirac_deviation_bound(&self, sup_f: f64) -> f64 {
        let off_center = 1.0 - rat_to_f64(&self.zero_cell_weight);
        2.0 * sup_f * (off_center + self.outer_tail)
    }
}

/// Sphere mass factor `(p^{ln} - p^{(l-1)n}) exp(-p^{2l} |xi|^2)`: the `l`-th
/// term of the normalization series. Public as a test oracle hook.
pub fn gaussian_series_term(p: u64, n: usize, l: i64, xi_norm_sq: f64) -> f64 {
    let pf = p as f64;
    let shell = pf.powi((l * n as i64) as i32) - pf.powi(((l - 1) * n as i64) as i32);
    shell * (-pf.powi(2 * l as i32) * xi_norm_sq).exp()
}

/// Build the radial Gaussian-like measure for scale `xi != 0` on `Q_p^n`,
/// keeping the spheres `|x| = p^l` for `l` in `(l_min, l_max]` cell by cell
/// at resolution `m = -l_min` and lumping all of `|x| <= p^{l_min}` into the
/// single cell at the origin. Weights are derived from floating-point
/// series terms (the density is not locally constant, so exactness is
/// impossible); they are then normalized exactly to total mass 1.
pub fn radial_gaussian(
    xi: &PadicScalar,
    n: usize,
    l_min: i64,
    l_max: i64,
) -> Result<RadialGaussian> {
    if xi.is_zero() {
        return Err(Error::InvalidParameter(
            "gaussian scale xi must be nonzero".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if l_min > l_max {
        return Err(Error::EmptyWindow);
    }
    let p = xi.p();
    let m = -l_min;
    let xi_norm = rat_to_f64(&xi.norm());
    let xi_norm_sq = xi_norm * xi_norm;
    if !xi_norm_sq.is_finite() || xi_norm_sq == 0.0 {
        return Err(Error::InvalidParameter(
            "gaussian scale is out of floating-point range".into(),
        ));
    }

    // Inner lump: sum of all series terms at and below l_min. The terms
    // peak near l = -log_p |xi| and decay like p^{ln} below it, so summing
    // down to a couple hundred levels under both l_min and the peak
    // exhausts the series at f64 precision.
    let peak = (-xi_norm_sq.ln() / (2.0 * (p as f64).ln())).floor() as i64;
    let floor_l = peak.min(l_min) - 220;
    let mut inner = 0.0f64;
    for l in floor_l..=l_min {
        inner += gaussian_series_term(p, n, l, xi_norm_sq);
    }
    if !inner.is_finite() {
        return Err(Error::InvalidParameter(
            "series terms overflow f64; shrink the window".into(),
        ));
    }

    let mut raw: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    let origin = vec![BigRational::zero(); n];
    let inner_rat = crate::rational::rat_from_f64(inner)?;
    raw.push((origin.clone(), inner_rat));

    let mut total_cells = BigInt::one();
    for l in (l_min + 1)..=l_max {
        let width = (l + m) as u32;
        let sphere_cells =
            BigInt::from(p).pow(width * n as u32) - BigInt::from(p).pow((width - 1) * n as u32);
        total_cells += &sphere_cells;
        check_cell_budget(&total_cells, "radial gaussian")?;
        let term = gaussian_series_term(p, n, l, xi_norm_sq);
        if !term.is_finite() {
            return Err(Error::InvalidParameter(
                "series terms overflow f64; shrink the window".into(),
            ));
        }
        let term_rat = crate::rational::rat_from_f64(term)?;
        if term_rat.is_zero() {
            continue;
        }
        let cell_weight = term_rat / BigRational::from_integer(sphere_cells.clone());
        let radix = BigInt::from(p)
            .pow(width)
            .to_u64()
            .expect("sphere radix fits after budget check");
        let scale = prime_power(p, -l);
        let mut emitted = BigInt::zero();
        for k in digit_vectors(radix, n) {
            if k.iter().all(|kj| kj % p == 0) {
                continue;
            }
            let center: Vec<BigRational> = k
                .iter()
                .map(|kj| &scale * BigRational::from_integer(BigInt::from(*kj)))
                .collect();
            raw.push((center, cell_weight.clone()));
            emitted += 1;
        }
        debug_assert_eq!(emitted, sphere_cells);
    }

    let total = rat_sum(raw.iter().map(|(_, w)| w));
    if total.is_zero() {
        return Err(Error::InvalidParameter(
            "window captures no mass at this scale".into(),
        ));
    }
    let cells = raw
        .into_iter()
        .map(|(c, w)| (c, w / &total));
    let measure = BallMeasure::from_cells(p, n, m, Mode::Real, false, cells)?;
    let zero_cell_weight = measure.weight_at(&origin)?;

    let mut outer = 0.0f64;
    let mut l = l_max + 1;
    loop {
        let term = gaussian_series_term(p, n, l, xi_norm_sq);
        if !term.is_finite() {
            return Err(Error::InvalidParameter(
                "series terms overflow f64; shrink the window".into(),
            ));
        }
        if term <= f64::MIN_POSITIVE || l > l_max + 4096 {
            break;
        }
        outer += term;
        l += 1;
    }
    let outer_tail = outer / rat_to_f64(&total);

    Ok(RadialGaussian {
        measure,
        zero_cell_weight,
        outer_tail,
    })
}

/// Verify the tail inequality for probability measures `mu`, `nu` with `nu`
/// symmetric and `l` in `(0, 1)`:
///
/// `mu({x : theta_nu(x) <= l}) <= (1 - l)^{-1} integral of (1 - theta_mu) d nu`.
///
/// Transforms are exact cyclotomic values; the final real comparison uses
/// floating approximations padded by a slack of `1e-9` in the inequality's
/// favor, so `true` means "held up to slack". The exact Fubini identity
/// `integral of theta_nu d mu = integral of theta_mu d nu` behind the
/// inequality is checked along the way at full precision.
pub fn symmetric_tail_inequality_check(
    mu: &BallMeasure,
    nu: &BallMeasure,
    l: &BigRational,
) -> Result<bool> {
    const SLACK: f64 = 1e-9;
    if mu.mode() != &Mode::Real || nu.mode() != &Mode::Real {
        return Err(Error::ModeMismatch);
    }
    if mu.p() != nu.p() {
        return Err(Error::PrimeMismatch(mu.p(), nu.p()));
    }
    if mu.n() != nu.n() {
        return Err(Error::DimensionMismatch(mu.n(), nu.n()));
    }
    if !nu.is_symmetric() {
        return Err(Error::InvalidParameter(
            "tail inequality needs a symmetric second measure".into(),
        ));
    }
    if !mu.is_probability() || !nu.is_probability() {
        return Err(Error::InvalidParameter(
            "tail inequality needs probability measures".into(),
        ));
    }
    if l.is_zero() || l.is_negative() || *l >= BigRational::one() {
        return Err(Error::InvalidParameter(
            "threshold must lie strictly between 0 and 1".into(),
        ));
    }
    let p = mu.p();
    let as_scalars = |center: &[BigRational]| -> Result<Vec<PadicScalar>> {
        center
            .iter()
            .map(|c| PadicScalar::new(p, c.clone()))
            .collect()
    };
    let l_f = rat_to_f64(l);
    let mut lhs = 0.0f64;
    let mut fubini_left = CyclotomicElement::zero(p);
    for (center, w) in mu.cells() {
        let theta = nu.fourier_stieltjes(&as_scalars(center)?)?;
        fubini_left = fubini_left.add(&theta.scale(w));
        let (re, im) = theta.complex_approx();
        debug_assert!(im.abs() < 1e-9, "symmetric transform must be real");
        if re <= l_f + SLACK {
            lhs += rat_to_f64(w);
        }
    }
    let mut integral = 0.0f64;
    let mut fubini_right = CyclotomicElement::zero(p);
    for (center, w) in nu.cells() {
        let theta = mu.fourier_stieltjes(&as_scalars(center)?)?;
        fubini_right = fubini_right.add(&theta.scale(w));
        let (re, _im) = theta.complex_approx();
        integral += (1.0 - re) * rat_to_f64(w);
    }
    debug_assert_eq!(fubini_left, fubini_right, "transform duality must be exact");
    let rhs = integral / (1.0 - l_f);
    Ok(lhs <= rhs + SLACK)
}
