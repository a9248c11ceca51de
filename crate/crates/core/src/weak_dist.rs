//! Weak distributions: consistent families of measures on the coordinate
//! spaces `Q_p^{k_1} -> Q_p^{k_2} -> ...`, the finite-level face of measures
//! on infinite-dimensional ultrametric sequence spaces.
//!
//! A [`WeakDistribution`] stores finitely many levels; every "for all n"
//! statement is checked over the stored levels and reported as such. The
//! module provides the consistency and tightness verdicts, cylinder-set
//! evaluation, plane concentration, and the two covariance-style witness
//! computations ([`minlos_sazonov_witness`], [`sazonov_witness`]) whose
//! transcendental factor `pi^2` is carried symbolically and rounded into
//! the value group through a certified rational enclosure.

use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::measures::{BallMeasure, ClopenSet, IntegrandValue, LocallyConstantFn};
use crate::padic::{
    fractional_part, rational_norm, rational_valuation, Mode, PadicScalar, ValueScalar, Valuation,
};
use crate::rational::prime_power;

/// Certified rational enclosure of `pi^2`: the true value 9.8696044010...
/// lies strictly inside `[PI_SQ_LO, PI_SQ_HI]`.
pub fn pi_sq_enclosure() -> (BigRational, BigRational) {
    let ten9 = num::BigInt::from(1_000_000_000u64);
    (
        BigRational::new(num::BigInt::from(9_869_604_401u64), ten9.clone()),
        BigRational::new(num::BigInt::from(9_869_604_404u64), ten9),
    )
}

/// A finite family of measures `mu_j` on `Q_p^{k_j}` for strictly
/// increasing dimensions `k_1 < k_2 < ...`, intended to be consistent under
/// dropping trailing coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakDistribution {
    dims: Vec<usize>,
    levels: Vec<BallMeasure>,
}

/// Pre-image description of a cylinder: a clopen base read at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderSet {
    pub level: usize,
    pub base: ClopenSet,
}

/// Outcome of [`WeakDistribution::check_consistency`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub ok: bool,
    /// First violating adjacent pair, if any.
    pub violation: Option<ConsistencyViolation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyViolation {
    /// Index of the lower level of the offending pair.
    pub lower: usize,
    /// Index of the upper level.
    pub upper: usize,
    /// Norm of the difference between the projected upper level and the
    /// lower level (total variation in real mode, max s-adic weight norm
    /// in s-adic mode); zero when comparison itself was impossible.
    pub discrepancy: BigRational,
    pub detail: String,
}

/// One `(c, r)` case of a tightness schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessCase {
    pub c: BigRational,
    pub r: BigRational,
    pub passed: bool,
    /// First level violating the bound, if any.
    pub witness_level: Option<usize>,
    /// Largest outside mass/norm observed across levels.
    pub worst_outside: BigRational,
}

/// Outcome of [`WeakDistribution::check_tightness`].
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessReport {
    /// `sup_n` of the level norms (finite by finiteness of the family; the
    /// uniform-boundedness hypothesis is reported, not extrapolated).
    pub sup_level_norm: BigRational,
    pub cases: Vec<TightnessCase>,
}

/// Whether the whole cell at `center` lies in the closed sup-norm ball of
/// radius `r`; cells have radius `p^{-m}`, so the zero cell forces
/// `r >= p^{-m}`.
fn cell_in_ball(p: u64, m: i64, center: &[BigRational], r: &BigRational) -> bool {
    prime_power(p, -m) <= *r && center.iter().all(|c| rational_norm(p, c) <= *r)
}

impl WeakDistribution {
    /// Assemble from explicit levels; dimensions must strictly increase and
    /// match the measures, which must share a prime and mode.
    pub fn new(levels: Vec<BallMeasure>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::InvalidParameter("no levels given".into()))?;
        let (p, mode) = (first.p(), first.mode().clone());
        let mut dims = Vec::with_capacity(levels.len());
        for mu in &levels {
            if mu.p() != p {
                return Err(Error::PrimeMismatch(p, mu.p()));
            }
            if mu.mode() != &mode {
                return Err(Error::ModeMismatch);
            }
            if let Some(&last) = dims.last() {
                if mu.n() <= last {
                    return Err(Error::InvalidParameter(
                        "level dimensions must strictly increase".into(),
                    ));
                }
            }
            dims.push(mu.n());
        }
        Ok(WeakDistribution { dims, levels })
    }

    /// Family of successive products `f_1, f_1 x f_2, f_1 x f_2 x f_3, ...`
    /// — consistent by construction.
    pub fn from_products(factors: &[BallMeasure]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("no factors given".into()));
        }
        let mut levels: Vec<BallMeasure> = Vec::with_capacity(factors.len());
        for f in factors {
            let next = match levels.last() {
                None => f.clone(),
                Some(prev) => prev.product_measure(f)?,
            };
            levels.push(next);
        }
        Self::new(levels)
    }

    /// Family of leading-coordinate marginals of one measure — consistent
    /// by transitivity of marginalization.
    pub fn from_marginals(big: &BallMeasure, dims: &[usize]) -> Result<Self> {
        let mut levels = Vec::with_capacity(dims.len());
        for &k in dims {
            if k > big.n() {
                return Err(Error::DimensionMismatch(big.n(), k));
            }
            let coords: Vec<usize> = (0..k).collect();
            levels.push(big.marginal(&coords)?);
        }
        Self::new(levels)
    }

    pub fn p(&self) -> u64 {
        self.levels[0].p()
    }

    pub fn mode(&self) -> &Mode {
        self.levels[0].mode()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn levels(&self) -> &[BallMeasure] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> Result<&BallMeasure> {
        self.levels
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("no level {j}")))
    }

    /// Project `upper` onto the first `k` coordinates and compare with
    /// `lower` at a common resolution; `None` means equal.
    fn pair_discrepancy(
        &self,
        lower_idx: usize,
        upper_idx: usize,
    ) -> std::result::Result<Option<(BigRational, String)>, String> {
        let lower = &self.levels[lower_idx];
        let upper = &self.levels[upper_idx];
        let coords: Vec<usize> = (0..lower.n()).collect();
        let projected = upper.marginal(&coords).map_err(|e| e.to_string())?;
        let target = projected.m().max(lower.m());
        let align = |mu: &BallMeasure| -> std::result::Result<BallMeasure, String> {
            mu.refine_to(target).map_err(|e| {
                format!("levels at resolutions {} vs {target} cannot be aligned: {e}", mu.m())
            })
        };
        let a = align(&projected)?;
        let b = align(lower)?;
        let diff = BallMeasure::from_cells(
            a.p(),
            a.n(),
            target,
            a.mode().clone(),
            false,
            a.cells()
                .map(|(c, w)| (c.clone(), w.clone()))
                .chain(b.cells().map(|(c, w)| (c.clone(), -w.clone()))),
        )
        .map_err(|e| e.to_string())?;
        let discrepancy = diff.norm();
        if discrepancy.is_zero() {
            Ok(None)
        } else {
            Ok(Some((
                discrepancy,
                format!("projection of level {upper_idx} differs from level {lower_idx}"),
            )))
        }
    }

    /// Verify that dropping trailing coordinates sends each level exactly
    /// onto the previous one. Violations (including incomparable pairs) are
    /// report content, not errors.
    pub fn check_consistency(&self) -> ConsistencyReport {
        self.check_consistency_through(self.levels.len().saturating_sub(1))
    }

    /// Consistency restricted to adjacent pairs up to level `j`.
    pub fn check_consistency_through(&self, j: usize) -> ConsistencyReport {
        let top = j.min(self.levels.len().saturating_sub(1));
        for upper in 1..=top {
            let lower = upper - 1;
            match self.pair_discrepancy(lower, upper) {
                Ok(None) => {}
                Ok(Some((discrepancy, detail))) => {
                    return ConsistencyReport {
                        ok: false,
                        violation: Some(ConsistencyViolation {
                            lower,
                            upper,
                            discrepancy,
                            detail,
                        }),
                    }
                }
                Err(detail) => {
                    return ConsistencyReport {
                        ok: false,
                        violation: Some(ConsistencyViolation {
                            lower,
                            upper,
                            discrepancy: BigRational::zero(),
                            detail,
                        }),
                    }
                }
            }
        }
        ConsistencyReport {
            ok: true,
            violation: None,
        }
    }

    fn require_consistent_through(&self, j: usize) -> Result<()> {
        let report = self.check_consistency_through(j);
        match report.violation {
            None => Ok(()),
            Some(v) => Err(Error::InconsistentWeakDistribution(format!(
                "levels {} and {}: {}",
                v.lower, v.upper, v.detail
            ))),
        }
    }

    /// Mass/norm escaping the ball `B(0, r)` at each level, against the
    /// tolerance schedule. Real mode measures escape by total variation,
    /// s-adic mode by the max weight norm of the outside cells. A cell only
    /// partly inside the ball counts as outside (this can happen only for
    /// the zero cell, when `r < p^{-m}`), so a reported pass is always
    /// sound.
    pub fn check_tightness(&self, schedule: &[(BigRational, BigRational)]) -> TightnessReport {
        let sup_level_norm = self
            .levels
            .iter()
            .map(BallMeasure::norm)
            .max()
            .unwrap_or_else(BigRational::zero);
        let cases = schedule
            .iter()
            .map(|(c, r)| {
                let mut witness_level = None;
                let mut worst_outside = BigRational::zero();
                for (idx, mu) in self.levels.iter().enumerate() {
                    let outside_cells = mu
                        .cells()
                        .filter(|(center, _)| !cell_in_ball(mu.p(), mu.m(), center, r));
                    let outside = match mu.mode() {
                        Mode::Real => outside_cells.map(|(_, w)| w.abs()).sum(),
                        Mode::Sadic(_) => outside_cells
                            .map(|(_, w)| mu.mode().abs(w))
                            .max()
                            .unwrap_or_else(BigRational::zero),
                    };
                    if outside > *c && witness_level.is_none() {
                        witness_level = Some(idx);
                    }
                    if outside > worst_outside {
                        worst_outside = outside;
                    }
                }
                TightnessCase {
                    c: c.clone(),
                    r: r.clone(),
                    passed: witness_level.is_none(),
                    witness_level,
                    worst_outside,
                }
            })
            .collect();
        TightnessReport {
            sup_level_norm,
            cases,
        }
    }

    /// Measure of the cylinder with base `C.base` read at level `C.level`.
    /// Requires consistency through that level, which makes the value
    /// independent of the level at which the cylinder is expressed.
    pub fn cylinder_evaluate(&self, c: &CylinderSet) -> Result<ValueScalar> {
        let mu = self.level(c.level)?;
        self.require_consistent_through(c.level)?;
        mu.measure_of(&c.base)
    }

    /// Integral of a cylinder function read at level `j`; same consistency
    /// requirement and level-independence as [`Self::cylinder_evaluate`].
    pub fn integrate_cylinder<V: IntegrandValue>(
        &self,
        j: usize,
        phi: &LocallyConstantFn<V>,
    ) -> Result<V> {
        let mu = self.level(j)?;
        self.require_consistent_through(j)?;
        mu.integrate(phi)
    }
}

/// Mass of `{x : |x_j| <= c for all j > k}` — the `c`-neighborhood of the
/// span of the first `k` coordinates. Exact value in real mode, norm of the
/// restriction in s-adic mode. `c` must be a power of `p` no smaller than
/// the cell radius, so the set is a union of cells.
pub fn plane_concentration(mu: &BallMeasure, k: usize, c: &BigRational) -> Result<BigRational> {
    if k > mu.n() {
        return Err(Error::DimensionMismatch(mu.n(), k));
    }
    let aligned = c.is_positive()
        && match rational_valuation(mu.p(), c) {
            Valuation::Finite(v) => *c == prime_power(mu.p(), v) && v >= -mu.m(),
            Valuation::Infinity => false,
        };
    if !aligned {
        return Err(Error::Misaligned(format!(
            "threshold {c} is not a cell-aligned power of {}",
            mu.p()
        )));
    }
    let near_plane = mu
        .cells()
        .filter(|(center, _)| {
            center[k..]
                .iter()
                .all(|cj| rational_norm(mu.p(), cj) <= *c)
        });
    Ok(match mu.mode() {
        Mode::Real => near_plane.map(|(_, w)| w.clone()).sum(),
        Mode::Sadic(_) => near_plane
            .map(|(_, w)| mu.mode().abs(w))
            .max()
            .unwrap_or_else(BigRational::zero),
    })
}

/// Output of [`minlos_sazonov_witness`]: the correlation-style quantities
/// `J(j,l) = 2 pi^2 * integral over B(0,r) of {x_j}_p {x_l}_p d mu`, their
/// roundings `g(j,l)` into the value group, and scalars `xi(j,l)` realizing
/// `|xi(j,l)|_p = g(j,l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinlosWitness {
    /// Exact rational `q(j,l)` with `J(j,l) = q(j,l) * pi^2`.
    pub pi_sq_factor: Vec<Vec<BigRational>>,
    /// `g(j,l)`: `|J(j,l)|` rounded up into the value group, certified
    /// through the `pi^2` enclosure; satisfies `|J| <= g <= p |J|`.
    pub group_bound: Vec<Vec<BigRational>>,
    /// `xi(j,l) = p^{-t}` where `g(j,l) = p^t` (zero where `g` vanishes).
    pub xi: Vec<Vec<PadicScalar>>,
}

/// Round `|q| * pi^2` up into the value group of `Q_p`, certified: both
/// endpoints of the `pi^2` enclosure must round to the same power, else the
/// enclosure cannot decide and the computation refuses.
pub fn certified_group_round(p: u64, q_abs: &BigRational) -> Result<BigRational> {
    if q_abs.is_negative() {
        return Err(Error::InvalidParameter(
            "rounding expects a nonnegative magnitude".into(),
        ));
    }
    if q_abs.is_zero() {
        return Ok(BigRational::zero());
    }
    let (lo, hi) = pi_sq_enclosure();
    let g_lo = crate::padic::round_up_to_value_group(p, &(q_abs * lo));
    let g_hi = crate::padic::round_up_to_value_group(p, &(q_abs * hi));
    if g_lo == g_hi {
        Ok(g_lo)
    } else {
        Err(Error::EnclosureAmbiguous)
    }
}

/// Compute the Minlos–Sazonov witness matrix for a real-mode measure over
/// the ball `B(0, r)`. The integrand `{x_j}_p {x_l}_p` is constant on cells
/// only at resolution `m >= 0`, and the ball must be a union of cells
/// (`r >= p^{-m}`).
pub fn minlos_sazonov_witness(mu: &BallMeasure, r: &BigRational) -> Result<MinlosWitness> {
    if mu.mode() != &Mode::Real {
        return Err(Error::ModeMismatch);
    }
    if mu.m() < 0 {
        return Err(Error::ResolutionViolation(
            "fractional parts are not cell-constant at resolution m < 0".into(),
        ));
    }
    if !r.is_positive() {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    if *r < prime_power(mu.p(), -mu.m()) {
        return Err(Error::Misaligned(format!(
            "ball radius {r} is below the cell radius"
        )));
    }
    let p = mu.p();
    let n = mu.n();
    let two = BigRational::from_integer(2.into());
    let mut pi_sq_factor = vec![vec![BigRational::zero(); n]; n];
    for (center, w) in mu.cells() {
        if !cell_in_ball(p, mu.m(), center, r) {
            continue;
        }
        let eta: Vec<BigRational> = center.iter().map(|c| fractional_part(p, c)).collect();
        for j in 0..n {
            if eta[j].is_zero() {
                continue;
            }
            for l in 0..n {
                if eta[l].is_zero() {
                    continue;
                }
                pi_sq_factor[j][l] += &two * &eta[j] * &eta[l] * w;
            }
        }
    }
    let mut group_bound = vec![vec![BigRational::zero(); n]; n];
    let mut xi = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Vec::with_capacity(n);
        for l in 0..n {
            let g = certified_group_round(p, &pi_sq_factor[j][l].abs())?;
            let xi_jl = if g.is_zero() {
                PadicScalar::zero(p)
            } else {
                match rational_valuation(p, &g) {
                    Valuation::Finite(t) => PadicScalar::new(p, prime_power(p, -t))?,
                    Valuation::Infinity => unreachable!("nonzero rounding"),
                }
            };
            debug_assert_eq!(xi_jl.norm(), g);
            group_bound[j][l] = g;
            row.push(xi_jl);
        }
        xi.push(row);
    }
    Ok(MinlosWitness {
        pi_sq_factor,
        group_bound,
        xi,
    })
}

/// Smallest (coordinatewise) vector of cell-aligned radii `z` such that the
/// box `{x : |x_j| <= z_j}` captures mass (real) or norm (s-adic) at least
/// `1 - eps`. Greedy left-to-right shrink from the bounding box: since
/// capture is monotone in every radius, the result admits no further shrink
/// of any single coordinate, i.e. it is minimal in the partial order.
pub fn sazonov_witness(mu: &BallMeasure, eps: &BigRational) -> Result<Vec<BigRational>> {
    if !eps.is_positive() {
        return Err(Error::InvalidParameter(
            "tolerance eps must be positive".into(),
        ));
    }
    if !mu.is_probability() {
        return Err(Error::InvalidParameter(
            "box witness needs a probability measure".into(),
        ));
    }
    let p = mu.p();
    let floor = prime_power(p, -mu.m());
    let threshold = BigRational::one() - eps;
    let cell_radius = |center: &[BigRational], j: usize| -> BigRational {
        rational_norm(p, &center[j]).max(floor.clone())
    };
    let capture = |z: &[BigRational]| -> BigRational {
        let caught = mu
            .cells()
            .filter(|(center, _)| (0..mu.n()).all(|j| cell_radius(center, j) <= z[j]));
        match mu.mode() {
            Mode::Real => caught.map(|(_, w)| w.clone()).sum(),
            Mode::Sadic(_) => caught
                .map(|(_, w)| mu.mode().abs(w))
                .max()
                .unwrap_or_else(BigRational::zero),
        }
    };
    let mut z: Vec<BigRational> = (0..mu.n())
        .map(|j| {
            mu.cells()
                .map(|(center, _)| cell_radius(center, j))
                .max()
                .unwrap_or_else(|| floor.clone())
        })
        .collect();
    debug_assert!(capture(&z) >= threshold, "bounding box captures everything");
    for j in 0..mu.n() {
        let mut candidates: Vec<BigRational> = mu
            .cells()
            .map(|(center, _)| cell_radius(center, j))
            .chain(std::iter::once(floor.clone()))
            .collect();
        candidates.sort();
        candidates.dedup();
        for cand in candidates {
            if cand >= z[j] {
                break;
            }
            let saved = std::mem::replace(&mut z[j], cand.clone());
            if capture(&z) >= threshold {
                break;
            }
            z[j] = saved;
            // Candidates ascend: a failing radius means larger failing
            // subsets were already excluded, so keep scanning upward.
        }
    }
    Ok(z)
}
