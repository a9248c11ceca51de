//! Scenario dispatch: load inputs, call the core, assemble reports.

use num::rational::BigRational;
use num::{One, Zero};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::Path;

use nam_core::kakutani::{kakutani_decide, orthogonality_check, KakutaniVerdict, Orthogonality};
use nam_core::linalg::{gauss_decompose, split_isometry, RationalMatrix};
use nam_core::measures::BallMeasure;
use nam_core::padic::PadicScalar;
use nam_core::rational::{rat_from_str, rat_to_string};
use nam_core::weak_dist::{minlos_sazonov_witness, sazonov_witness};

use crate::report::{
    cyclotomic_value, function_value, rat_list, rat_rows, rat_value, BatchReport, CheckResult,
    ScenarioReport, ScenarioStatus,
};
use crate::scenario::{Command, Scenario, ScenarioFile};
use crate::InputError;

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Ceiling for enumerated lattices.
    pub cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cap: crate::DEFAULT_CAP,
        }
    }
}

/// Run a scenario file and return the report; pure input failures (file
/// unreadable, schema invalid) are returned as `Err` and map to exit 2.
pub fn run_file(path: &Path, opts: RunOptions) -> Result<BatchReport, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(run_scenarios(&file.into_scenarios(), base_dir, opts))
}

/// Run scenarios in order; every per-scenario problem is captured in its
/// report entry rather than aborting the batch.
pub fn run_scenarios(scenarios: &[Scenario], base_dir: &Path, opts: RunOptions) -> BatchReport {
    let reports = scenarios
        .iter()
        .enumerate()
        .map(|(index, s)| match run_one(s, base_dir, opts) {
            Ok((checks, results)) => {
                let status = if checks.iter().all(|c| c.pass) {
                    ScenarioStatus::Ok
                } else {
                    ScenarioStatus::CheckFailed
                };
                ScenarioReport {
                    index,
                    command: s.command.name(),
                    status,
                    checks,
                    results,
                    error: None,
                }
            }
            Err(e) => ScenarioReport {
                index,
                command: s.command.name(),
                status: ScenarioStatus::Error,
                checks: Vec::new(),
                results: Value::Null,
                error: Some(e.to_string()),
            },
        })
        .collect();
    BatchReport::new(reports)
}

type CommandOutcome = Result<(Vec<CheckResult>, Value), InputError>;

fn run_one(s: &Scenario, base_dir: &Path, opts: RunOptions) -> CommandOutcome {
    match s.command {
        Command::Transform => cmd_transform(s, base_dir, opts),
        Command::Convolve => cmd_convolve(s, base_dir),
        Command::Product => cmd_product(s, base_dir),
        Command::Pushforward => cmd_pushforward(s, base_dir),
        Command::Moments => cmd_moments(s, base_dir),
        Command::Consistency => cmd_consistency(s, base_dir),
        Command::Tightness => cmd_tightness(s, base_dir),
        Command::Kakutani => cmd_kakutani(s, base_dir),
        Command::Orthogonality => cmd_orthogonality(s, base_dir),
        Command::Decompose => cmd_decompose(s, base_dir),
        Command::Split => cmd_split(s, base_dir),
        Command::Minlos => cmd_minlos(s, base_dir),
        Command::SazonovWitness => cmd_sazonov(s, base_dir),
        Command::VerifyIdentities => cmd_verify_identities(s, base_dir, opts),
    }
}

fn parse_rat(s: &str) -> Result<BigRational, InputError> {
    rat_from_str(s).map_err(InputError::from)
}

fn parse_vector(p: u64, parts: &[String]) -> Result<Vec<PadicScalar>, InputError> {
    parts
        .iter()
        .map(|s| Ok(PadicScalar::new(p, parse_rat(s)?)?))
        .collect()
}

fn lattice_scalars(mu: &BallMeasure, cap: usize) -> Result<Vec<Vec<PadicScalar>>, InputError> {
    mu.admissible_lattice(cap)?
        .into_iter()
        .map(|z| {
            z.into_iter()
                .map(|r| Ok(PadicScalar::new(mu.p(), r)?))
                .collect()
        })
        .collect()
}

fn scalars_doc(z: &[PadicScalar]) -> Value {
    Value::Array(
        z.iter()
            .map(|c| Value::String(rat_to_string(c.value())))
            .collect(),
    )
}

fn measure_doc_value(mu: &BallMeasure) -> Value {
    serde_json::to_value(nam_core::json::MeasureDoc::from_measure(mu))
        .expect("measure documents serialize")
}

// ---------------------------------------------------------------- transform

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct TransformParams {
    /// Explicit evaluation points, each a vector of rationals.
    z: Option<Vec<Vec<String>>>,
    /// Evaluate over the whole admissible lattice (default when no `z`).
    lattice: Option<bool>,
}

fn cmd_transform(s: &Scenario, base_dir: &Path, opts: RunOptions) -> CommandOutcome {
    let mu = s.measure_input("measure", base_dir)?;
    let params: TransformParams = s.typed_params()?;
    let mut points: Vec<Vec<PadicScalar>> = Vec::new();
    if let Some(zs) = &params.z {
        for z in zs {
            points.push(parse_vector(mu.p(), z)?);
        }
    }
    if params.lattice.unwrap_or(params.z.is_none()) {
        points.extend(lattice_scalars(&mu, opts.cap)?);
    }
    let mut entries = Vec::with_capacity(points.len());
    for z in &points {
        let theta = mu.fourier_stieltjes(z)?;
        entries.push(json!({
            "z": scalars_doc(z),
            "admissible": mu.is_admissible(z),
            "value": cyclotomic_value(&theta),
        }));
    }
    let zero = vec![PadicScalar::zero(mu.p()); mu.n()];
    let at_zero = mu.fourier_stieltjes(&zero)?;
    let checks = vec![CheckResult {
        name: "transform-at-zero-equals-mass".into(),
        pass: at_zero.to_rational() == Some(mu.mass()),
    }];
    let results = json!({
        "mass": rat_value(&mu.mass()),
        "points": entries,
    });
    Ok((checks, results))
}

// ------------------------------------------------- convolve / product / etc

fn cmd_convolve(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let a = s.measure_input("a", base_dir)?;
    let b = s.measure_input("b", base_dir)?;
    let c = a.convolve(&b)?;
    Ok((Vec::new(), json!({ "measure": measure_doc_value(&c) })))
}

fn cmd_product(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let a = s.measure_input("a", base_dir)?;
    let b = s.measure_input("b", base_dir)?;
    let c = a.product_measure(&b)?;
    Ok((Vec::new(), json!({ "measure": measure_doc_value(&c) })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PushforwardParams {
    rows: Vec<Vec<String>>,
}

fn parse_matrix(rows: &[Vec<String>]) -> Result<RationalMatrix, InputError> {
    let rows = rows
        .iter()
        .map(|row| row.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RationalMatrix::from_rows(rows)?)
}

fn cmd_pushforward(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let mu = s.measure_input("measure", base_dir)?;
    let params: PushforwardParams = s.typed_params()?;
    let t = parse_matrix(&params.rows)?;
    let nu = mu.pushforward(&t)?;
    let results = json!({
        "measure": measure_doc_value(&nu),
        "resolution": nu.m(),
    });
    Ok((Vec::new(), results))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentsParams {
    z: Vec<String>,
    q: u32,
}

fn cmd_moments(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let mu = s.measure_input("measure", base_dir)?;
    let params: MomentsParams = s.typed_params()?;
    let z = parse_vector(mu.p(), &params.z)?;
    let (value, bound) = mu.weak_q_moment(&z, params.q)?;
    let results = json!({
        "q": params.q,
        "value": rat_value(&value),
        "suspect_bound_factor": rat_value(&bound),
    });
    Ok((Vec::new(), results))
}

// -------------------------------------------------- weak distribution cmds

fn cmd_consistency(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let wd = s.weak_dist_input("weak_distribution", base_dir)?;
    let report = wd.check_consistency();
    let violation = report.violation.as_ref().map(|v| {
        json!({
            "lower": v.lower,
            "upper": v.upper,
            "discrepancy": rat_value(&v.discrepancy),
            "detail": v.detail,
        })
    });
    let checks = vec![CheckResult {
        name: "consistency".into(),
        pass: report.ok,
    }];
    let results = json!({
        "ok": report.ok,
        "violation": violation,
    });
    Ok((checks, results))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TightnessParams {
    schedule: Vec<TightnessEntryParam>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TightnessEntryParam {
    c: String,
    r: String,
}

fn cmd_tightness(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let wd = s.weak_dist_input("weak_distribution", base_dir)?;
    let params: TightnessParams = s.typed_params()?;
    let schedule = params
        .schedule
        .iter()
        .map(|e| Ok((parse_rat(&e.c)?, parse_rat(&e.r)?)))
        .collect::<Result<Vec<_>, InputError>>()?;
    let report = wd.check_tightness(&schedule);
    let mut checks = Vec::with_capacity(report.cases.len());
    let mut cases = Vec::with_capacity(report.cases.len());
    for case in &report.cases {
        checks.push(CheckResult {
            name: format!(
                "tightness(c={}, r={})",
                rat_to_string(&case.c),
                rat_to_string(&case.r)
            ),
            pass: case.passed,
        });
        cases.push(json!({
            "c": rat_value(&case.c),
            "r": rat_value(&case.r),
            "passed": case.passed,
            "witness_level": case.witness_level,
            "worst_outside": rat_value(&case.worst_outside),
        }));
    }
    let results = json!({
        "sup_level_norm": rat_value(&report.sup_level_norm),
        "cases": cases,
    });
    Ok((checks, results))
}

// ----------------------------------------------------------- kakutani cmds

fn cmd_kakutani(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let pp = s.product_pair_input("pair", base_dir)?;
    let verdict = kakutani_decide(&pp)?;
    let results = match &verdict {
        KakutaniVerdict::Equivalent {
            report,
            partial_densities,
            product_limit,
        } => json!({
            "verdict": "equivalent",
            "betas": rat_list(&report.betas),
            "partial_products": rat_list(&report.partial_products),
            "product_limit": rat_value(product_limit),
            "partial_densities": partial_densities
                .iter()
                .map(|d| function_value(d.function()))
                .collect::<Vec<_>>(),
        }),
        KakutaniVerdict::Singular {
            report,
            certificate,
        } => json!({
            "verdict": "singular",
            "betas": rat_list(&report.betas),
            "partial_products": rat_list(&report.partial_products),
            "certificate": certificate,
        }),
    };
    Ok((Vec::new(), results))
}

fn cmd_orthogonality(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let a = s.measure_input("a", base_dir)?;
    let b = s.measure_input("b", base_dir)?;
    let results = match orthogonality_check(&a, &b)? {
        Orthogonality::Orthogonal => json!({ "verdict": "orthogonal" }),
        Orthogonality::Overlapping { witness } => json!({
            "verdict": "overlapping",
            "witness": rat_list(&witness),
        }),
    };
    Ok((Vec::new(), results))
}

// ------------------------------------------------------------- linear algebra

fn cmd_decompose(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let op = s.operator_input("matrix", base_dir)?;
    let dec = gauss_decompose(&op)?;
    let reconstruction = dec.reconstruct()?;
    let sign = BigRational::from_integer(i64::from(dec.sign).into());
    let checks = vec![
        CheckResult {
            name: "reconstruction-exact".into(),
            pass: &reconstruction == op.leading_block(),
        },
        CheckResult {
            name: "diag-product-matches-determinant".into(),
            pass: dec.diag_product() == &sign * &dec.det,
        },
    ];
    let results = json!({
        "permutation": dec.sigma,
        "permutation_cycles": dec.permutation_cycles(),
        "s": rat_rows(&dec.permutation_matrix()),
        "c": rat_rows(&dec.lower),
        "d": rat_list(&dec.diag),
        "e": rat_rows(&dec.upper),
        "det": rat_value(&dec.det),
        "sign": dec.sign,
    });
    Ok((checks, results))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitParams {
    c: String,
}

fn cmd_split(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let op = s.operator_input("matrix", base_dir)?;
    let params: SplitParams = s.typed_params()?;
    let c = parse_rat(&params.c)?;
    let split = split_isometry(&op, &c)?;
    let product = split
        .a1
        .leading_block()
        .mul(split.a2.leading_block())?;
    let checks = vec![
        CheckResult {
            name: "split-reconstructs".into(),
            pass: &product == op.leading_block(),
        },
        CheckResult {
            name: "deviation-within-threshold".into(),
            pass: split.max_deviation <= c,
        },
        CheckResult {
            name: "isometry-determinant-is-unit".into(),
            pass: split.det_a2_norm.is_one(),
        },
    ];
    let results = json!({
        "a1": rat_rows(split.a1.leading_block()),
        "a2": rat_rows(split.a2.leading_block()),
        "corner": split.n,
        "max_deviation": rat_value(&split.max_deviation),
        "det_a2_norm": rat_value(&split.det_a2_norm),
    });
    Ok((checks, results))
}

// --------------------------------------------------------- witness commands

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MinlosParams {
    r: String,
}

fn cmd_minlos(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let mu = s.measure_input("measure", base_dir)?;
    let params: MinlosParams = s.typed_params()?;
    let r = parse_rat(&params.r)?;
    let witness = minlos_sazonov_witness(&mu, &r)?;
    let (lo, hi) = nam_core::weak_dist::pi_sq_enclosure();
    let p_rat = BigRational::from_integer(mu.p().into());
    // The value-group bracket |J| <= g <= p |J|, certified through the
    // enclosure endpoints.
    let mut bracket_ok = true;
    for (q_row, g_row) in witness.pi_sq_factor.iter().zip(&witness.group_bound) {
        for (q, g) in q_row.iter().zip(g_row) {
            let q_abs = num::Signed::abs(q);
            if q_abs.is_zero() {
                bracket_ok &= g.is_zero();
            } else {
                bracket_ok &= *g >= &q_abs * &lo && *g <= &p_rat * &q_abs * &hi;
            }
        }
    }
    let checks = vec![CheckResult {
        name: "value-group-bracket".into(),
        pass: bracket_ok,
    }];
    let rows_of = |m: &Vec<Vec<BigRational>>| -> Value {
        Value::Array(m.iter().map(|row| rat_list(row)).collect())
    };
    let results = json!({
        "pi_sq_factor": rows_of(&witness.pi_sq_factor),
        "group_bound": rows_of(&witness.group_bound),
        "xi": witness
            .xi
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|x| Value::String(rat_to_string(x.value())))
                        .collect(),
                )
            })
            .collect::<Vec<_>>(),
    });
    Ok((checks, results))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SazonovParams {
    eps: String,
}

fn cmd_sazonov(s: &Scenario, base_dir: &Path) -> CommandOutcome {
    let mu = s.measure_input("measure", base_dir)?;
    let params: SazonovParams = s.typed_params()?;
    let eps = parse_rat(&params.eps)?;
    let radii = sazonov_witness(&mu, &eps)?;
    // Mass/norm captured by the returned box, recomputed for the report.
    let captured = box_capture(&mu, &radii);
    let threshold = BigRational::one() - &eps;
    let checks = vec![CheckResult {
        name: "box-captures-threshold".into(),
        pass: captured >= threshold,
    }];
    let results = json!({
        "radii": rat_list(&radii),
        "captured": rat_value(&captured),
    });
    Ok((checks, results))
}

fn box_capture(mu: &BallMeasure, radii: &[BigRational]) -> BigRational {
    use nam_core::padic::{rational_norm, Mode};
    use nam_core::rational::prime_power;
    let floor = prime_power(mu.p(), -mu.m());
    let caught = mu.cells().filter(|(center, _)| {
        center
            .iter()
            .zip(radii)
            .all(|(c, z)| rational_norm(mu.p(), c).max(floor.clone()) <= *z)
    });
    match mu.mode() {
        Mode::Real => caught.map(|(_, w)| w.clone()).sum(),
        Mode::Sadic(_) => caught
            .map(|(_, w)| mu.mode().abs(w))
            .max()
            .unwrap_or_else(BigRational::zero),
    }
}

// ------------------------------------------------------- verify-identities

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct VerifyParams {}

fn cmd_verify_identities(s: &Scenario, base_dir: &Path, opts: RunOptions) -> CommandOutcome {
    let a = s.measure_input("a", base_dir)?;
    let b = s.measure_input("b", base_dir)?;
    let _params: VerifyParams = s.typed_params()?;
    let mut checks = Vec::new();

    // theta(0) recovers the total mass.
    for (tag, mu) in [("a", &a), ("b", &b)] {
        let zero = vec![PadicScalar::zero(mu.p()); mu.n()];
        checks.push(CheckResult {
            name: format!("theta-at-zero-equals-mass-{tag}"),
            pass: mu.fourier_stieltjes(&zero)?.to_rational() == Some(mu.mass()),
        });
    }

    // Convolution theorem on the convolution's admissible lattice.
    let conv = a.convolve(&b)?;
    let mut pass = true;
    for z in lattice_scalars(&conv, opts.cap)? {
        let lhs = conv.fourier_stieltjes(&z)?;
        let rhs = a.fourier_stieltjes(&z)?.mul(&b.fourier_stieltjes(&z)?);
        pass &= lhs.sub(&rhs).is_zero();
    }
    checks.push(CheckResult {
        name: "convolution-theorem".into(),
        pass,
    });

    // Product transforms factor coordinatewise.
    let prod = a.product_measure(&b)?;
    let mut pass = true;
    for z in lattice_scalars(&prod, opts.cap)? {
        let (za, zb) = z.split_at(a.n());
        let lhs = prod.fourier_stieltjes(&z)?;
        let rhs = a.fourier_stieltjes(za)?.mul(&b.fourier_stieltjes(zb)?);
        pass &= lhs.sub(&rhs).is_zero();
    }
    checks.push(CheckResult {
        name: "product-factorization".into(),
        pass,
    });

    // Pushforward by p * I is adjoint to multiplying the argument by p.
    let mut pass = true;
    for (_, mu) in [("a", &a), ("b", &b)] {
        let p_rat = BigRational::from_integer(mu.p().into());
        let mut t = RationalMatrix::identity(mu.n());
        for i in 0..mu.n() {
            *t.get_mut(i, i) = p_rat.clone();
        }
        let nu = mu.pushforward(&t)?;
        for z in lattice_scalars(&nu, opts.cap)? {
            let lhs = nu.fourier_stieltjes(&z)?;
            let tz = z
                .iter()
                .map(|c| Ok(PadicScalar::new(mu.p(), c.value() * &p_rat)?))
                .collect::<Result<Vec<_>, InputError>>()?;
            let rhs = mu.fourier_stieltjes(&tz)?;
            pass &= lhs.sub(&rhs).is_zero();
        }
    }
    checks.push(CheckResult {
        name: "pushforward-adjoint".into(),
        pass,
    });

    // Symmetry holds exactly when the transform is real on the lattice.
    for (tag, mu) in [("a", &a), ("b", &b)] {
        let mut all_real = true;
        for z in lattice_scalars(mu, opts.cap)? {
            all_real &= mu.fourier_stieltjes(&z)?.is_real();
        }
        checks.push(CheckResult {
            name: format!("symmetry-iff-real-transform-{tag}"),
            pass: mu.is_symmetric() == all_real,
        });
    }

    let results = json!({
        "convolution": measure_doc_value(&conv),
        "product": measure_doc_value(&prod),
    });
    Ok((checks, results))
}

