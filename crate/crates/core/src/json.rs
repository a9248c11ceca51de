//! On-disk document schemas. Every rational travels as a reduced `"a/b"`
//! string, so files round-trip exactly; loaders re-canonicalize ball
//! centers and reject documents that name one cell twice (a merge would
//! silently change the measure, which a file format must not do).

use num::rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kakutani::{ProductPair, TailRule};
use crate::linalg::{PerturbationOperator, RationalMatrix};
use crate::measures::BallMeasure;
use crate::padic::{canonical_mod, Mode};
use crate::rational::{rat_from_str, rat_to_string};
use crate::weak_dist::WeakDistribution;

fn parse_rat(s: &str, what: &str) -> Result<BigRational> {
    rat_from_str(s).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub center: Vec<String>,
    pub weight: String,
}

/// Schema: `{p, n, m, mode, refinable, cells: [{center, weight}, ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    pub p: u64,
    pub n: usize,
    pub m: i64,
    pub mode: Mode,
    pub refinable: bool,
    pub cells: Vec<CellDoc>,
}

impl MeasureDoc {
    pub fn from_measure(mu: &BallMeasure) -> Self {
        MeasureDoc {
            p: mu.p(),
            n: mu.n(),
            m: mu.m(),
            mode: *mu.mode(),
            refinable: mu.refinable(),
            cells: mu
                .cells()
                .map(|(center, weight)| CellDoc {
                    center: center.iter().map(rat_to_string).collect(),
                    weight: rat_to_string(weight),
                })
                .collect(),
        }
    }

    pub fn to_measure(&self) -> Result<BallMeasure> {
        let mut seen: BTreeSet<Vec<BigRational>> = BTreeSet::new();
        let mut cells = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let center: Vec<BigRational> = cell
                .center
                .iter()
                .map(|s| parse_rat(s, "cell center"))
                .collect::<Result<_>>()?;
            let canon: Vec<BigRational> = center
                .iter()
                .map(|c| canonical_mod(self.p, self.m, c))
                .collect();
            if !seen.insert(canon) {
                return Err(Error::Parse(format!(
                    "duplicate cell [{}] in measure document",
                    cell.center.join(", ")
                )));
            }
            cells.push((center, parse_rat(&cell.weight, "cell weight")?));
        }
        BallMeasure::from_cells(self.p, self.n, self.m, self.mode, self.refinable, cells)
    }
}

/// Schema: `{p, mode, levels: [measure, ...], dims: [k1, k2, ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakDistDoc {
    pub p: u64,
    pub mode: Mode,
    pub levels: Vec<MeasureDoc>,
    pub dims: Vec<usize>,
}

impl WeakDistDoc {
    pub fn from_weak_distribution(wd: &WeakDistribution) -> Self {
        WeakDistDoc {
            p: wd.p(),
            mode: *wd.mode(),
            levels: wd.levels().iter().map(MeasureDoc::from_measure).collect(),
            dims: wd.dims().to_vec(),
        }
    }

    pub fn to_weak_distribution(&self) -> Result<WeakDistribution> {
        let levels: Vec<BallMeasure> = self
            .levels
            .iter()
            .map(MeasureDoc::to_measure)
            .collect::<Result<_>>()?;
        let wd = WeakDistribution::new(levels)?;
        if wd.p() != self.p {
            return Err(Error::Parse(format!(
                "document prime {} does not match its levels ({})",
                self.p,
                wd.p()
            )));
        }
        if wd.mode() != &self.mode {
            return Err(Error::Parse(
                "document mode does not match its levels".into(),
            ));
        }
        if wd.dims() != self.dims.as_slice() {
            return Err(Error::Parse(format!(
                "document dims {:?} do not match level dimensions {:?}",
                self.dims,
                wd.dims()
            )));
        }
        Ok(wd)
    }
}

/// Schema: `{p, d, rows: [["a/b", ...], ...]}` — the leading `d x d` block
/// of an identity-plus-finite-rank operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub p: u64,
    pub d: usize,
    pub rows: Vec<Vec<String>>,
}

impl MatrixDoc {
    pub fn from_operator(op: &PerturbationOperator) -> Self {
        MatrixDoc {
            p: op.p(),
            d: op.dim(),
            rows: op
                .leading_block()
                .to_rows()
                .iter()
                .map(|row| row.iter().map(rat_to_string).collect())
                .collect(),
        }
    }

    pub fn to_operator(&self) -> Result<PerturbationOperator> {
        if self.rows.len() != self.d || self.rows.iter().any(|r| r.len() != self.d) {
            return Err(Error::Parse(format!(
                "matrix document declares d={} but rows disagree",
                self.d
            )));
        }
        let rows: Vec<Vec<BigRational>> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_rat(s, "matrix entry"))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        PerturbationOperator::from_leading_block(self.p, RationalMatrix::from_rows(rows)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDoc {
    pub mu: MeasureDoc,
    pub nu: MeasureDoc,
}

/// Schema: `{"trivial": {}}` or `{"geometric": {"ratio": "a/b"}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailDoc {
    Trivial {},
    Geometric { ratio: String },
}

/// Schema: `{factors: [{mu, nu}, ...], tail: ...}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductPairDoc {
    pub factors: Vec<FactorDoc>,
    pub tail: TailDoc,
}

impl ProductPairDoc {
    pub fn from_pair(pp: &ProductPair) -> Self {
        ProductPairDoc {
            factors: pp
                .factors()
                .iter()
                .map(|(mu, nu)| FactorDoc {
                    mu: MeasureDoc::from_measure(mu),
                    nu: MeasureDoc::from_measure(nu),
                })
                .collect(),
            tail: match pp.tail() {
                TailRule::Trivial => TailDoc::Trivial {},
                TailRule::Geometric { ratio } => TailDoc::Geometric {
                    ratio: rat_to_string(ratio),
                },
            },
        }
    }

    pub fn to_pair(&self) -> Result<ProductPair> {
        let factors = self
            .factors
            .iter()
            .map(|f| Ok((f.mu.to_measure()?, f.nu.to_measure()?)))
            .collect::<Result<Vec<_>>>()?;
        let tail = match &self.tail {
            TailDoc::Trivial {} => TailRule::Trivial,
            TailDoc::Geometric { ratio } => TailRule::Geometric {
                ratio: parse_rat(ratio, "tail ratio")?,
            },
        };
        ProductPair::new(factors, tail)
    }
}
