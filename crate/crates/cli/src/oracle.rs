//! Deterministic enumeration of measures on the cell lattice of `Z_p^n` at
//! resolution `m`, with weights drawn from a finite grid. Drives the
//! brute-force property suites; explosive sizes are rejected up front.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed};

use nam_core::measures::{digit_vectors, BallMeasure};
use nam_core::padic::Mode;
use nam_core::{Error, Result};

/// The `p^{mn}` canonical cell centers of `Z_p^n` at resolution `m >= 0`,
/// in lexicographic order.
pub fn unit_lattice_centers(p: u64, n: usize, m: i64) -> Result<Vec<Vec<BigRational>>> {
    if m < 0 {
        return Err(Error::InvalidParameter(
            "the unit-ball lattice needs resolution m >= 0".into(),
        ));
    }
    let radix = BigInt::from(p).pow(m as u32);
    let radix: u64 = radix.try_into().map_err(|_| {
        Error::CapExceeded(format!("cell radix p^{m} does not fit a machine word"))
    })?;
    Ok(digit_vectors(radix, n)
        .map(|digits| {
            digits
                .iter()
                .map(|d| BigRational::from_integer(BigInt::from(*d)))
                .collect()
        })
        .collect())
}

fn cell_count(p: u64, n: usize, m: i64) -> BigInt {
    BigInt::from(p).pow((m as u32) * (n as u32))
}

/// All weight assignments `grid^{cells}` as measures, in lexicographic
/// order of the weight vectors; duplicate-free. Rejected when the raw count
/// exceeds `cap`.
pub fn enumerate_measures(
    p: u64,
    n: usize,
    m: i64,
    mode: Mode,
    grid: &[BigRational],
    cap: usize,
) -> Result<Vec<BallMeasure>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty weight grid".into()));
    }
    let cells = cell_count(p, n, m);
    let cells_usize: usize = cells
        .clone()
        .try_into()
        .map_err(|_| Error::CapExceeded("cell lattice too large to index".into()))?;
    let raw = BigInt::from(grid.len()).pow(cells_usize as u32);
    if raw > BigInt::from(cap) {
        return Err(Error::CapExceeded(format!(
            "{raw} candidate weight vectors exceed the cap {cap}"
        )));
    }
    let centers = unit_lattice_centers(p, n, m)?;
    let mut out = Vec::new();
    let mut stack = vec![0usize; cells_usize];
    loop {
        let cells_iter = centers
            .iter()
            .zip(&stack)
            .map(|(c, &gi)| (c.clone(), grid[gi].clone()));
        out.push(BallMeasure::from_cells(p, n, m, mode, false, cells_iter)?);
        // Odometer step over grid indices, most significant cell first.
        let mut i = cells_usize;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            stack[i] += 1;
            if stack[i] < grid.len() {
                break;
            }
            stack[i] = 0;
        }
    }
}

/// Probability measures only: nonnegative grid weights summing to exactly
/// one, found by depth-first search with partial-sum pruning. Output order
/// is lexicographic in the weight vectors; `cap` bounds the number emitted.
pub fn enumerate_probability_measures(
    p: u64,
    n: usize,
    m: i64,
    mode: Mode,
    grid: &[BigRational],
    cap: usize,
) -> Result<Vec<BallMeasure>> {
    let mut grid: Vec<BigRational> = grid
        .iter()
        .filter(|w| !w.is_negative())
        .cloned()
        .collect();
    grid.sort();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::InvalidParameter(
            "weight grid has no nonnegative entries".into(),
        ));
    }
    let centers = unit_lattice_centers(p, n, m)?;
    let mut out = Vec::new();
    let mut weights: Vec<BigRational> = Vec::with_capacity(centers.len());
    dfs(
        p,
        n,
        m,
        mode,
        &centers,
        &grid,
        &BigRational::one(),
        &mut weights,
        &mut out,
        cap,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    p: u64,
    n: usize,
    m: i64,
    mode: Mode,
    centers: &[Vec<BigRational>],
    grid: &[BigRational],
    remaining: &BigRational,
    weights: &mut Vec<BigRational>,
    out: &mut Vec<BallMeasure>,
    cap: usize,
) -> Result<()> {
    if weights.len() + 1 == centers.len() {
        // Last cell: the remainder must itself be a grid weight.
        if grid.binary_search(remaining).is_ok() {
            if out.len() >= cap {
                return Err(Error::CapExceeded(format!(
                    "more than {cap} probability measures in the grid"
                )));
            }
            let cells = centers
                .iter()
                .zip(weights.iter().chain(std::iter::once(remaining)))
                .map(|(c, w)| (c.clone(), w.clone()));
            out.push(BallMeasure::from_cells(p, n, m, mode, false, cells)?);
        }
        return Ok(());
    }
    for w in grid {
        if w > remaining {
            break;
        }
        weights.push(w.clone());
        let rest = remaining - w;
        dfs(p, n, m, mode, centers, grid, &rest, weights, out, cap)?;
        weights.pop();
    }
    Ok(())
}
