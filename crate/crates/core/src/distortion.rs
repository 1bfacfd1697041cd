//! Distortions between point patterns via min-cost assignment.
//!
//! Everything reduces to one kernel, [`solve_assignment`], a dense O(n^3)
//! shortest-augmenting-path Hungarian solver with row/column potentials.
//! The unequal-cardinality USOSPA case pads the smaller pattern with
//! virtual points whose cost against every real point is `c^2`.

use crate::error::{Error, Result};
use crate::patterns::PointPattern;

/// Optimal assignment of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[i]` is the column matched to row `i`.
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

/// Solves the linear assignment problem for a row-major `n x n` cost matrix.
///
/// Returns a permutation minimizing `sum_i cost[i][perm[i]]`. Ties are broken
/// by the solver's internal order; only the total cost is unique.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<Assignment> {
    if n == 0 {
        return Err(Error::Input("assignment needs n >= 1".into()));
    }
    if cost.len() != n * n {
        return Err(Error::Input(format!(
            "cost matrix has {} entries, expected {}x{}",
            cost.len(),
            n,
            n
        )));
    }
    if let Some(i) = cost.iter().position(|c| !c.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite cost at ({}, {})",
            i / n,
            i % n
        )));
    }
    Ok(hungarian(cost, n))
}

/// Convenience wrapper over a matrix given as rows.
pub fn solve_assignment_rows(rows: &[Vec<f64>]) -> Result<Assignment> {
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Input(format!(
            "row {} has {} entries in a {}-row matrix",
            bad,
            rows[bad].len(),
            n
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    solve_assignment(&flat, n)
}

// Potentials u (rows) and v (columns), 1-based with column 0 as the sentinel.
fn hungarian(cost: &[f64], n: usize) -> Assignment {
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let crow = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = crow[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[row_of_col[j] - 1] = j - 1;
    }
    let total_cost = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Assignment {
        permutation,
        total_cost,
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(x: &PointPattern, y: &PointPattern) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Input(format!(
            "patterns live in R^{} and R^{}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Squared-distance cost matrix between two equal-size patterns, optionally
/// capped at `cap`.
pub(crate) fn pair_costs(x: &PointPattern, y: &PointPattern, cap: Option<f64>) -> Vec<f64> {
    let mut cost = Vec::with_capacity(x.len() * y.len());
    for p in x.points() {
        for q in y.points() {
            let d = sq_dist(p, q);
            cost.push(match cap {
                Some(c2) => d.min(c2),
                None => d,
            });
        }
    }
    cost
}

/// Minimum-assignment squared error between equal-cardinality patterns.
pub fn rho2(x: &PointPattern, y: &PointPattern) -> Result<f64> {
    check_dims(x, y)?;
    if x.len() != y.len() {
        return Err(Error::NotApplicable(format!(
            "rho2 needs equal cardinalities, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let cost = pair_costs(x, y, None);
    Ok(hungarian(&cost, x.len()).total_cost)
}

/// Unnormalized squared OSPA distortion with cut-off `c`.
///
/// `(l - k) c^2 + min_tau sum_i min(||x_i - y_tau(i)||^2, c^2)` where `k` and
/// `l` are the smaller and larger cardinality.
pub fn usospa(x: &PointPattern, y: &PointPattern, c: f64) -> Result<f64> {
    check_dims(x, y)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Input(format!("cut-off must be positive, got {}", c)));
    }
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let l = large.len();
    let k = small.len();
    let c2 = c * c;
    if l == 0 {
        return Ok(0.0);
    }
    if k == 0 {
        return Ok(l as f64 * c2);
    }
    let mut cost = pair_costs(small, large, Some(c2));
    cost.resize(l * l, c2);
    Ok(hungarian(&cost, l).total_cost)
}

/// Nearest-neighbour lower bounds on USOSPA.
///
/// `card_ge` holds the bound valid when `|X| >= |Y|`, `card_le` the one valid
/// when `|X| <= |Y|`; a field is `None` when its case does not apply. An
/// empty `Y` contributes `c^2` per point of `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsospaLowerBounds {
    pub card_ge: Option<f64>,
    pub card_le: Option<f64>,
}

impl UsospaLowerBounds {
    /// The tightest bound among the applicable cases.
    pub fn best(&self) -> f64 {
        match (self.card_ge, self.card_le) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        }
    }
}

pub fn usospa_lower_bounds(
    x: &PointPattern,
    y: &PointPattern,
    c: f64,
) -> Result<UsospaLowerBounds> {
    check_dims(x, y)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Input(format!("cut-off must be positive, got {}", c)));
    }
    let c2 = c * c;
    let nn_sum: f64 = x
        .points()
        .map(|p| y.points().map(|q| sq_dist(p, q).min(c2)).fold(c2, f64::min))
        .sum();
    let (k, l) = (x.len(), y.len());
    Ok(UsospaLowerBounds {
        card_ge: (k >= l).then_some(nn_sum),
        card_le: (k <= l).then(|| (l - k) as f64 * c2 + nn_sum),
    })
}
