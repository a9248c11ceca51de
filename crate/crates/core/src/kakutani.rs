//! Densities between ball measures, the orthogonality test, product
//! densities, and the equivalence/singularity dichotomy for infinite
//! products of probability factors.
//!
//! An infinite product is represented honestly as a finite prefix of factor
//! pairs plus a declared tail rule; the dichotomy is then decided exactly:
//! a trivial tail leaves the finite product of the factor constants
//! `beta_j`, a geometric tail forces that product to zero.

use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::measures::{BallMeasure, LocallyConstantFn};

use crate::rational::rat_to_string;

/// Cellwise Radon–Nikodym density `rho = d mu / d nu` of one ball measure
/// against another, stored as a locally constant function on the reference
/// cells (zero off the reference support, by convention).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityFn {
    function: LocallyConstantFn<BigRational>,
}

impl DensityFn {
    pub fn function(&self) -> &LocallyConstantFn<BigRational> {
        &self.function
    }

    pub fn evaluate(&self, x: &[BigRational]) -> Result<BigRational> {
        self.function.evaluate(x)
    }

    /// Pointwise product `h * rho`, the integrand of the change-of-measure
    /// identity `integral of h d mu = integral of h rho d nu`. Both
    /// functions must live at one resolution.
    pub fn apply_to(&self, h: &LocallyConstantFn<BigRational>) -> Result<LocallyConstantFn<BigRational>> {
        let f = &self.function;
        if h.p() != f.p() {
            return Err(Error::PrimeMismatch(f.p(), h.p()));
        }
        if h.n() != f.n() {
            return Err(Error::DimensionMismatch(f.n(), h.n()));
        }
        if h.m() != f.m() {
            return Err(Error::ResolutionViolation(format!(
                "density at resolution {} cannot weight a function at resolution {}",
                f.m(),
                h.m()
            )));
        }
        let mut keys: Vec<Vec<BigRational>> =
            f.entries().chain(h.entries()).map(|(c, _)| c.clone()).collect();
        keys.sort();
        keys.dedup();
        let values = keys
            .into_iter()
            .map(|c| {
                let v = h.evaluate(&c)? * f.evaluate(&c)?;
                Ok((c, v))
            })
            .collect::<Result<Vec<_>>>()?;
        LocallyConstantFn::from_values(
            f.p(),
            f.n(),
            f.m(),
            values,
            h.default_value() * f.default_value(),
        )
    }
}

/// Align two measures on one resolution (refining the coarser when its
/// locally uniform structure allows) and check they share space and mode.
fn aligned_pair(mu: &BallMeasure, nu: &BallMeasure) -> Result<(BallMeasure, BallMeasure)> {
    if mu.p() != nu.p() {
        return Err(Error::PrimeMismatch(mu.p(), nu.p()));
    }
    if mu.n() != nu.n() {
        return Err(Error::DimensionMismatch(mu.n(), nu.n()));
    }
    if mu.mode() != nu.mode() {
        return Err(Error::ModeMismatch);
    }
    let m = mu.m().max(nu.m());
    Ok((mu.refine_to(m)?, nu.refine_to(m)?))
}

/// Cellwise density of `mu` against `nu`: `rho(cell) = w_mu / w_nu` where
/// `w_nu` is nonzero, and zero where both weights vanish. A cell carrying
/// `mu`-weight outside the support of `nu` is an absolute-continuity
/// violation.
pub fn density(mu: &BallMeasure, nu: &BallMeasure) -> Result<DensityFn> {
    let (mu, nu) = aligned_pair(mu, nu)?;
    let mut values = Vec::new();
    for (center, w_mu) in mu.cells() {
        if nu.weight_at(center)?.is_zero() {
            return Err(Error::AbsoluteContinuityViolation(format!(
                "[{}]",
                center
                    .iter()
                    .map(rat_to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        values.push((center.clone(), w_mu / &nu.weight_at(center)?));
    }
    let function =
        LocallyConstantFn::from_values(mu.p(), mu.n(), mu.m(), values, BigRational::zero())?;
    Ok(DensityFn { function })
}

/// The factor constant `beta = sup_x |rho(x)| N_nu(x)`: the density norm
/// weighted by the pointwise norm of the reference measure. At most 1 for
/// probability factors.
pub fn beta(mu: &BallMeasure, nu: &BallMeasure) -> Result<BigRational> {
    let (mu_a, nu_a) = aligned_pair(mu, nu)?;
    let rho = density(&mu_a, &nu_a)?;
    let mut best = BigRational::zero();
    for (center, w_nu) in nu_a.cells() {
        let weighted = nu_a.mode().abs(&rho.evaluate(center)?) * nu_a.mode().abs(w_nu);
        if weighted > best {
            best = weighted;
        }
    }
    if mu.is_probability() && nu.is_probability() {
        debug_assert!(best <= BigRational::one(), "beta exceeds 1 on probabilities");
    }
    Ok(best)
}

/// Tail behaviour declared for the factors beyond the stored prefix.
#[derive(Clone, Debug, PartialEq)]
pub enum TailRule {
    /// All further factor pairs are equal: `beta_j = 1`, density 1.
    Trivial,
    /// All further `beta_j` are bounded by a fixed ratio below one, so
    /// their product diverges to zero.
    Geometric { ratio: BigRational },
}

/// A finite prefix of probability factor pairs `(mu_j, nu_j)` together with
/// a tail rule; the data from which the dichotomy is decided.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPair {
    factors: Vec<(BallMeasure, BallMeasure)>,
    tail: TailRule,
}

impl ProductPair {
    pub fn new(factors: Vec<(BallMeasure, BallMeasure)>, tail: TailRule) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty factor prefix".into()))?;
        let (p, mode) = (first.0.p(), first.0.mode().clone());
        for (j, (mu, nu)) in factors.iter().enumerate() {
            for side in [mu, nu] {
                if side.p() != p {
                    return Err(Error::PrimeMismatch(p, side.p()));
                }
                if side.mode() != &mode {
                    return Err(Error::ModeMismatch);
                }
                if !side.is_probability() {
                    return Err(Error::InvalidParameter(format!(
                        "factor pair {j} contains a non-probability measure"
                    )));
                }
            }
            if mu.n() != nu.n() {
                return Err(Error::DimensionMismatch(mu.n(), nu.n()));
            }
        }
        if let TailRule::Geometric { ratio } = &tail {
            if !ratio.is_positive() || *ratio >= BigRational::one() {
                return Err(Error::InvalidParameter(
                    "geometric tail ratio must lie in (0, 1)".into(),
                ));
            }
        }
        Ok(ProductPair { factors, tail })
    }

    pub fn factors(&self) -> &[(BallMeasure, BallMeasure)] {
        &self.factors
    }

    pub fn tail(&self) -> &TailRule {
        &self.tail
    }
}

/// Per-factor constants and their running products, reported with every
/// verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixReport {
    pub betas: Vec<BigRational>,
    /// `prod_{j <= n} beta_j`, nonincreasing for probability factors.
    pub partial_products: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KakutaniVerdict {
    Equivalent {
        report: PrefixReport,
        /// Truncated densities `q_n = prod_{j <= n} rho_j` on the product
        /// spaces of the first `n` factors.
        partial_densities: Vec<DensityFn>,
        /// Value of the full infinite product (the tail contributes 1).
        product_limit: BigRational,
    },
    Singular {
        report: PrefixReport,
        certificate: String,
    },
}

/// Decide the dichotomy: with a trivial tail the infinite product of the
/// `beta_j` is the finite prefix product, so equivalence holds exactly when
/// it is positive; a geometric tail drives the product to zero and forces
/// singularity.
pub fn kakutani_decide(pp: &ProductPair) -> Result<KakutaniVerdict> {
    let mut betas = Vec::with_capacity(pp.factors.len());
    let mut partial_products = Vec::with_capacity(pp.factors.len());
    let mut running = BigRational::one();
    for (mu, nu) in &pp.factors {
        let b = beta(mu, nu)?;
        running *= &b;
        betas.push(b);
        partial_products.push(running.clone());
    }
    let report = PrefixReport {
        betas,
        partial_products,
    };
    match &pp.tail {
        TailRule::Geometric { ratio } => Ok(KakutaniVerdict::Singular {
            certificate: format!(
                "prefix product {} times a tail bounded by powers of {} diverges to 0",
                rat_to_string(&report.partial_products[report.partial_products.len() - 1]),
                rat_to_string(ratio)
            ),
            report,
        }),
        TailRule::Trivial => {
            let limit = report.partial_products[report.partial_products.len() - 1].clone();
            if limit.is_zero() {
                return Ok(KakutaniVerdict::Singular {
                    certificate: "a prefix factor already has beta = 0".into(),
                    report,
                });
            }
            let mut partial_densities = Vec::with_capacity(pp.factors.len());
            let mut acc: Option<(BallMeasure, BallMeasure)> = None;
            for (mu, nu) in &pp.factors {
                let next = match acc {
                    None => (mu.clone(), nu.clone()),
                    Some((am, an)) => (am.product_measure(mu)?, an.product_measure(nu)?),
                };
                partial_densities.push(density(&next.0, &next.1)?);
                acc = Some(next);
            }
            Ok(KakutaniVerdict::Equivalent {
                report,
                partial_densities,
                product_limit: limit,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Orthogonality {
    Orthogonal,
    Overlapping { witness: Vec<BigRational> },
}

/// Pointwise-norm orthogonality: the measures are orthogonal exactly when
/// no point carries nonzero pointwise norm under both, i.e. their cell
/// supports are disjoint. Symmetric; returns a witness cell otherwise.
pub fn orthogonality_check(mu1: &BallMeasure, mu2: &BallMeasure) -> Result<Orthogonality> {
    let (a, b) = aligned_pair(mu1, mu2)?;
    for (center, _) in a.cells() {
        if !b.weight_at(center)?.is_zero() {
            return Ok(Orthogonality::Overlapping {
                witness: center.clone(),
            });
        }
    }
    Ok(Orthogonality::Orthogonal)
}

/// Density of a product of measures against a product of references: the
/// cellwise product of the factor densities. Factor violations propagate.
pub fn product_density(
    mu1: &BallMeasure,
    nu1: &BallMeasure,
    mu2: &BallMeasure,
    nu2: &BallMeasure,
) -> Result<DensityFn> {
    density(&mu1.product_measure(mu2)?, &nu1.product_measure(nu2)?)
}

/// Exact change-of-measure check: `integral of h d mu` against
/// `integral of h rho d nu` for `rho = density(mu, nu)`.
pub fn change_of_measure_holds(
    mu: &BallMeasure,
    nu: &BallMeasure,
    h: &LocallyConstantFn<BigRational>,
) -> Result<bool> {
    let (mu_a, nu_a) = aligned_pair(mu, nu)?;
    let rho = density(&mu_a, &nu_a)?;
    let lhs: BigRational = mu_a.integrate(h)?;
    let rhs: BigRational = nu_a.integrate(&rho.apply_to(&h.clone())?)?;
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Mode;
    use crate::rational::{prime_power, rat_from_str};

    fn q(s: &str) -> BigRational {
        rat_from_str(s).unwrap()
    }

    fn qv(parts: &[&str]) -> Vec<BigRational> {
        parts.iter().map(|s| q(s)).collect()
    }

    fn atoms(
        p: u64,
        n: usize,
        m: i64,
        mode: Mode,
        cells: &[(&[&str], &str)],
    ) -> BallMeasure {
        BallMeasure::from_cells(
            p,
            n,
            m,
            mode,
            false,
            cells.iter().map(|(c, w)| (qv(c), q(w))),
        )
        .unwrap()
    }

    #[test]
    fn density_basic_cases() {
        let haar = BallMeasure::haar_unit(2, 1, 2, Mode::Real).unwrap();
        // Self-density is constantly one on the support.
        let rho = density(&haar, &haar).unwrap();
        for k in 0..4u32 {
            let x = vec![BigRational::from_integer(k.into())];
            assert_eq!(rho.evaluate(&x).unwrap(), q("1"));
        }
        // Dirac against Haar: the inverse cell weight on the zero cell.
        let d = BallMeasure::dirac(2, 2, Mode::Real, &qv(&["0"])).unwrap();
        let rho = density(&d, &haar).unwrap();
        assert_eq!(rho.evaluate(&qv(&["0"])).unwrap(), q("4"));
        assert_eq!(rho.evaluate(&qv(&["1"])).unwrap(), q("0"));
        // An atom off the reference support violates absolute continuity.
        let off = BallMeasure::dirac(2, 2, Mode::Real, &qv(&["1/2"])).unwrap();
        assert!(matches!(
            density(&off, &haar),
            Err(Error::AbsoluteContinuityViolation(_))
        ));
        // Mismatched resolutions are bridged by refining the locally
        // uniform side.
        let coarse = BallMeasure::haar_unit(2, 1, 1, Mode::Real).unwrap();
        let rho = density(&d, &coarse).unwrap();
        assert_eq!(rho.evaluate(&qv(&["0"])).unwrap(), q("4"));
    }

    #[test]
    fn change_of_measure_is_exact() {
        let nu = BallMeasure::haar_unit(3, 1, 1, Mode::Real).unwrap();
        let mu = atoms(3, 1, 1, Mode::Real, &[(&["0"], "2/3"), (&["2"], "1/3")]);
        let h = LocallyConstantFn::from_values(
            3,
            1,
            1,
            [(qv(&["0"]), q("5")), (qv(&["1"]), q("-7")), (qv(&["2"]), q("1/2"))],
            BigRational::zero(),
        )
        .unwrap();
        assert!(change_of_measure_holds(&mu, &nu, &h).unwrap());
        let lhs: BigRational = mu.integrate(&h).unwrap();
        assert_eq!(lhs, q("5") * q("2/3") + q("1/2") * q("1/3"));
    }

    #[test]
    fn beta_identities() {
        // Self-pair: rho = 1 and the best cell weight is the largest one.
        let mu = atoms(2, 1, 2, Mode::Real, &[(&["0"], "3/4"), (&["1"], "1/4")]);
        assert_eq!(beta(&mu, &mu).unwrap(), q("3/4"));
        // Brute-force identity: when supp mu is inside supp nu the weighted
        // density norm collapses to max |w_mu| in the mode's absolute
        // value — real mode here.
        let nu = BallMeasure::haar_unit(2, 1, 2, Mode::Real).unwrap();
        let expected = mu
            .cells()
            .map(|(_, w)| w.abs())
            .max()
            .unwrap();
        assert_eq!(beta(&mu, &nu).unwrap(), expected);
        // s-adic mode: |w_mu/w_nu|_s |w_nu|_s = |w_mu|_s cell by cell.
        let mus = atoms(
            2,
            1,
            1,
            Mode::Sadic(3),
            &[(&["0"], "3"), (&["1/2"], "-2")],
        );
        let nus = atoms(
            2,
            1,
            1,
            Mode::Sadic(3),
            &[(&["0"], "1/3"), (&["1/2"], "2/3")],
        );
        let expected = mus
            .cells()
            .map(|(_, w)| mus.mode().abs(w))
            .max()
            .unwrap();
        assert_eq!(beta(&mus, &nus).unwrap(), expected);
        assert_eq!(beta(&mus, &nus).unwrap(), q("1"));
        // s-adic self-pairs attain 1: the weighted density norm is the full
        // measure norm. In real mode the same holds for single-atom
        // probabilities.
        assert_eq!(beta(&mus, &mus).unwrap(), q("1"));
        let d = BallMeasure::dirac(2, 1, Mode::Real, &qv(&["0"])).unwrap();
        assert_eq!(beta(&d, &d).unwrap(), q("1"));
    }

    #[test]
    fn dichotomy_trivial_tail() {
        let nu = BallMeasure::haar_unit(2, 1, 1, Mode::Real).unwrap();
        // Biased factors with beta_j = 1/2 + 1/2^{j+1}, exact rationals.
        let factors: Vec<(BallMeasure, BallMeasure)> = (1..=3i64)
            .map(|j| {
                let big = q("1/2") + prime_power(2, -(j + 1));
                let mu = atoms(
                    2,
                    1,
                    1,
                    Mode::Real,
                    &[(&["0"], &rat_to_string(&big)), (&["1"], &rat_to_string(&(q("1") - &big)))],
                );
                (mu, nu.clone())
            })
            .collect();
        let pp = ProductPair::new(factors.clone(), TailRule::Trivial).unwrap();
        let verdict = kakutani_decide(&pp).unwrap();
        match verdict {
            KakutaniVerdict::Equivalent {
                report,
                partial_densities,
                product_limit,
            } => {
                assert_eq!(report.betas, vec![q("3/4"), q("5/8"), q("9/16")]);
                assert_eq!(product_limit, q("3/4") * q("5/8") * q("9/16"));
                // Partial products never increase.
                for w in report.partial_products.windows(2) {
                    assert!(w[1] <= w[0]);
                }
                // The truncated densities satisfy change of measure at
                // every prefix length, checked on the product measures.
                let mut mu_acc: Option<BallMeasure> = None;
                let mut nu_acc: Option<BallMeasure> = None;
                for (k, (mu_j, nu_j)) in factors.iter().enumerate() {
                    mu_acc = Some(match mu_acc {
                        None => mu_j.clone(),
                        Some(a) => a.product_measure(mu_j).unwrap(),
                    });
                    nu_acc = Some(match nu_acc {
                        None => nu_j.clone(),
                        Some(a) => a.product_measure(nu_j).unwrap(),
                    });
                    let mp = mu_acc.as_ref().unwrap();
                    let np = nu_acc.as_ref().unwrap();
                    // q_k agrees with the directly computed density.
                    assert_eq!(&partial_densities[k], &density(mp, np).unwrap());
                    let h = LocallyConstantFn::constant(2, mp.n(), 1, q("1")).unwrap();
                    let lhs: BigRational = mp.integrate(&h).unwrap();
                    let rhs: BigRational = np
                        .integrate(&partial_densities[k].apply_to(&h).unwrap())
                        .unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
            other => panic!("expected equivalence, got {other:?}"),
        }
        // All factors equal: q_n is constantly 1 on the support.
        let same = ProductPair::new(
            vec![(nu.clone(), nu.clone()), (nu.clone(), nu.clone())],
            TailRule::Trivial,
        )
        .unwrap();
        match kakutani_decide(&same).unwrap() {
            KakutaniVerdict::Equivalent {
                partial_densities, ..
            } => {
                let q2 = &partial_densities[1];
                assert_eq!(q2.evaluate(&qv(&["0", "1"])).unwrap(), q("1"));
                assert_eq!(q2.evaluate(&qv(&["1", "1"])).unwrap(), q("1"));
            }
            other => panic!("expected equivalence, got {other:?}"),
        }
    }

    #[test]
    fn dichotomy_geometric_tail() {
        let nu = BallMeasure::haar_unit(2, 1, 1, Mode::Real).unwrap();
        let pp = ProductPair::new(
            vec![(nu.clone(), nu.clone())],
            TailRule::Geometric { ratio: q("1/2") },
        )
        .unwrap();
        match kakutani_decide(&pp).unwrap() {
            KakutaniVerdict::Singular {
                report,
                certificate,
            } => {
                // Real-mode self-pair beta: the largest cell weight.
                assert_eq!(report.betas, vec![q("1/2")]);
                assert_eq!(report.partial_products, vec![q("1/2")]);
                assert!(certificate.contains("diverges to 0"));
            }
            other => panic!("expected singularity, got {other:?}"),
        }
        // Invalid ratios are rejected at construction.
        assert!(ProductPair::new(
            vec![(nu.clone(), nu.clone())],
            TailRule::Geometric { ratio: q("1") }
        )
        .is_err());
        assert!(ProductPair::new(
            vec![(nu.clone(), nu)],
            TailRule::Geometric { ratio: q("0") }
        )
        .is_err());
    }

    #[test]
    fn prefix_invariants_are_enforced() {
        let nu = BallMeasure::haar_unit(2, 1, 1, Mode::Real).unwrap();
        let not_prob = atoms(2, 1, 1, Mode::Real, &[(&["0"], "1/2")]);
        assert!(ProductPair::new(vec![(not_prob, nu.clone())], TailRule::Trivial).is_err());
        // Absolute-continuity violations surface from the decision.
        let mu = BallMeasure::dirac(2, 1, Mode::Real, &qv(&["1"])).unwrap();
        let half = atoms(2, 1, 1, Mode::Real, &[(&["0"], "1")]);
        let pp = ProductPair::new(vec![(mu, half)], TailRule::Trivial).unwrap();
        assert!(matches!(
            kakutani_decide(&pp),
            Err(Error::AbsoluteContinuityViolation(_))
        ));
    }

    #[test]
    fn orthogonality_cases() {
        let d0 = BallMeasure::dirac(2, 1, Mode::Real, &qv(&["0"])).unwrap();
        let d1 = BallMeasure::dirac(2, 1, Mode::Real, &qv(&["1"])).unwrap();
        assert_eq!(orthogonality_check(&d0, &d1).unwrap(), Orthogonality::Orthogonal);
        assert_eq!(
            orthogonality_check(&d0, &d0).unwrap(),
            Orthogonality::Overlapping {
                witness: qv(&["0"])
            }
        );
        // Interleaved supports on four cells, checked against brute-force
        // disjointness, in both orders.
        let a = atoms(2, 1, 2, Mode::Real, &[(&["0"], "1/2"), (&["2"], "1/2")]);
        let b = atoms(2, 1, 2, Mode::Real, &[(&["1"], "1/3"), (&["3"], "2/3")]);
        let disjoint = a.cells().all(|(c, _)| b.weight_at(c).unwrap().is_zero());
        assert!(disjoint);
        assert_eq!(orthogonality_check(&a, &b).unwrap(), Orthogonality::Orthogonal);
        assert_eq!(
            orthogonality_check(&a, &b).unwrap(),
            orthogonality_check(&b, &a).unwrap()
        );
        let c = atoms(2, 1, 2, Mode::Real, &[(&["2"], "1")]);
        assert_eq!(
            orthogonality_check(&a, &c).unwrap(),
            Orthogonality::Overlapping {
                witness: qv(&["2"])
            }
        );
        // In s-adic mode the same criterion reads off pointwise norms.
        let sa = atoms(2, 1, 1, Mode::Sadic(3), &[(&["0"], "1")]);
        let sb = atoms(2, 1, 1, Mode::Sadic(3), &[(&["1"], "1")]);
        assert_eq!(orthogonality_check(&sa, &sb).unwrap(), Orthogonality::Orthogonal);
    }

    #[test]
    fn product_density_factorizes() {
        let mu1 = atoms(2, 1, 1, Mode::Real, &[(&["0"], "3/4"), (&["1"], "1/4")]);
        let nu1 = BallMeasure::haar_unit(2, 1, 1, Mode::Real).unwrap();
        let mu2 = atoms(2, 1, 1, Mode::Real, &[(&["0"], "1/3"), (&["1"], "2/3")]);
        let nu2 = atoms(2, 1, 1, Mode::Real, &[(&["0"], "1/2"), (&["1"], "1/2")]);
        let d1 = density(&mu1, &nu1).unwrap();
        let d2 = density(&mu2, &nu2).unwrap();
        let dp = product_density(&mu1, &nu1, &mu2, &nu2).unwrap();
        for c1 in ["0", "1"] {
            for c2 in ["0", "1"] {
                let x = qv(&[c1, c2]);
                assert_eq!(
                    dp.evaluate(&x).unwrap(),
                    d1.evaluate(&qv(&[c1])).unwrap() * d2.evaluate(&qv(&[c2])).unwrap()
                );
            }
        }
        // Identical pairs: constant one.
        let did = product_density(&nu2, &nu2, &nu2, &nu2).unwrap();
        assert_eq!(did.evaluate(&qv(&["0", "1"])).unwrap(), q("1"));
        // A violating factor propagates.
        let off = BallMeasure::dirac(2, 1, Mode::Real, &qv(&["1"])).unwrap();
        let tight = atoms(2, 1, 1, Mode::Real, &[(&["0"], "1")]);
        assert!(product_density(&off, &tight, &mu2, &nu2).is_err());
    }
}
