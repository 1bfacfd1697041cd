//! Center point patterns of a cell of equal-cardinality patterns.
//!
//! A center minimizing the average `rho2` is made of clique means, where the
//! cliques come from one permutation per pattern. Finding the best
//! permutations is a multi-dimensional assignment problem; [`center_exact`]
//! enumerates it for tiny cells and the hub heuristics approximate it with
//! pairwise assignments.
//!
//! The heuristics accept an optional squared cap `c^2` on the per-pair cost,
//! used when training for USOSPA within a single cardinality.

use crate::distortion::{pair_costs, solve_assignment, sq_dist};
use crate::error::{Error, Result};
use crate::patterns::PointPattern;

/// Largest number of permutation collections [`center_exact`] will enumerate.
pub const EXACT_LIMIT: f64 = 1e6;

/// One permutation per pattern of a cell.
///
/// `perms[p][i]` is the index, within pattern `p`, of the point placed in
/// clique `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueAssignment {
    perms: Vec<Vec<usize>>,
}

impl CliqueAssignment {
    pub fn new(perms: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        for (p, perm) in perms.iter().enumerate() {
            let mut seen = vec![false; k];
            if perm.len() != k {
                return Err(Error::Input(format!(
                    "permutation {} has length {}, expected {}",
                    p,
                    perm.len(),
                    k
                )));
            }
            for &j in perm {
                if j >= k || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::Input(format!("permutation {} is not a bijection", p)));
                }
            }
        }
        Ok(Self { perms })
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Number of cliques `k`.
    pub fn k(&self) -> usize {
        self.perms.first().map_or(0, Vec::len)
    }

    /// Members of every clique, one point per pattern, in cell order.
    pub fn cliques<'a>(&self, cell: &[&'a PointPattern]) -> Vec<Vec<&'a [f64]>> {
        (0..self.k())
            .map(|i| {
                cell.iter()
                    .zip(&self.perms)
                    .map(|(x, perm)| x.point(perm[i]))
                    .collect()
            })
            .collect()
    }

    /// Sum over cliques of all ordered pairwise squared distances.
    pub fn sum_cost(&self, cell: &[&PointPattern]) -> f64 {
        self.cliques(cell)
            .iter()
            .map(|c| {
                c.iter()
                    .map(|a| c.iter().map(|b| sq_dist(a, b)).sum::<f64>())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Pattern of clique arithmetic means.
    pub fn centers(&self, cell: &[&PointPattern]) -> Result<PointPattern> {
        let d = cell[0].dim();
        let n = cell.len() as f64;
        let mut coords = Vec::with_capacity(self.k() * d);
        for clique in self.cliques(cell) {
            let mut mean = vec![0.0; d];
            for p in clique {
                for (m, v) in mean.iter_mut().zip(p) {
                    *m += v;
                }
            }
            coords.extend(mean.into_iter().map(|m| m / n));
        }
        PointPattern::new(d, coords)
    }
}

/// A center together with the permutations that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSolution {
    pub center: PointPattern,
    pub cliques: CliqueAssignment,
    /// Pairwise assignment problems solved while building the cliques.
    pub assignment_solves: usize,
}

/// Common cardinality and dimension of a nonempty cell.
fn check_cell(cell: &[&PointPattern]) -> Result<(usize, usize)> {
    let first = cell
        .first()
        .ok_or_else(|| Error::Input("cell must contain at least one pattern".into()))?;
    let (k, d) = (first.len(), first.dim());
    for (p, x) in cell.iter().enumerate() {
        if x.dim() != d {
            return Err(Error::Dimension(format!(
                "pattern {} lives in R^{}, expected R^{}",
                p,
                x.dim(),
                d
            )));
        }
        if x.len() != k {
            return Err(Error::Input(format!(
                "centers need equal cardinalities; pattern {} has {} points, expected {}",
                p,
                x.len(),
                k
            )));
        }
    }
    Ok((k, d))
}

/// Matched cost between equal-cardinality patterns with optional cap.
pub fn matched_cost(x: &PointPattern, y: &PointPattern, cap: Option<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::NotApplicable(format!(
            "matched cost needs equal cardinalities, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(solve_assignment(&pair_costs(x, y, cap), x.len())?.total_cost)
}

/// Average matched cost from the cell to `center`.
pub fn average_cost(cell: &[&PointPattern], center: &PointPattern, cap: Option<f64>) -> Result<f64> {
    let mut sum = 0.0;
    for x in cell {
        sum += matched_cost(x, center, cap)?;
    }
    Ok(sum / cell.len() as f64)
}

/// `perm[i]` = point of `x` assigned to point `i` of `reference`.
fn align(reference: &PointPattern, x: &PointPattern, cap: Option<f64>) -> Result<Vec<usize>> {
    Ok(solve_assignment(&pair_costs(reference, x, cap), x.len())?.permutation)
}

fn trivial(cell: &[&PointPattern], k: usize) -> Result<CenterSolution> {
    let cliques = CliqueAssignment::new(vec![(0..k).collect(); cell.len()], k)?;
    Ok(CenterSolution {
        center: cliques.centers(cell)?,
        cliques,
        assignment_solves: 0,
    })
}

/// All permutations of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..k).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot has a successor");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// Exact center by enumerating every permutation collection, with the first
/// pattern fixed to the identity. Uses uncapped squared costs.
pub fn center_exact(cell: &[&PointPattern]) -> Result<CenterSolution> {
    let (k, d) = check_cell(cell)?;
    let n = cell.len();
    if k <= 1 || n == 1 {
        return trivial(cell, k);
    }
    let log_count = (n - 1) as f64 * crate::bounds::log_factorial(k as u64);
    if log_count > EXACT_LIMIT.ln() + 1e-9 {
        return Err(Error::TooLarge(format!(
            "exact center needs (k!)^(n-1) = {:.3e} enumerations for k = {}, n = {}; \
             use a hub heuristic instead",
            log_count.exp(),
            k,
            n
        )));
    }

    let perms = permutations(k);
    let mut choice = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut mean = vec![0.0; d];
    loop {
        // sum over ordered pairs in a clique = 2 n sum of squared deviations from its mean
        let mut cost = 0.0;
        for i in 0..k {
            mean.iter_mut().for_each(|m| *m = 0.0);
            for (x, &c) in cell.iter().zip(&choice) {
                for (m, v) in mean.iter_mut().zip(x.point(perms[c][i])) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for (x, &c) in cell.iter().zip(&choice) {
                cost += sq_dist(x.point(perms[c][i]), &mean);
            }
        }
        cost *= 2.0 * n as f64;
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, choice.clone()));
        }

        let Some(p) = (1..n).rev().find(|&p| choice[p] + 1 < perms.len()) else {
            break;
        };
        choice[p] += 1;
        choice[p + 1..].iter_mut().for_each(|c| *c = 0);
    }

    let (_, choice) = best.expect("at least one collection");
    let cliques = CliqueAssignment::new(choice.iter().map(|&c| perms[c].clone()).collect(), k)?;
    Ok(CenterSolution {
        center: cliques.centers(cell)?,
        cliques,
        assignment_solves: 0,
    })
}

/// Single-hub heuristic with uncapped costs.
pub fn center_single_hub(cell: &[&PointPattern], hub: usize) -> Result<CenterSolution> {
    center_single_hub_capped(cell, hub, None)
}

/// Aligns every pattern to `cell[hub]` and returns the clique means.
pub fn center_single_hub_capped(
    cell: &[&PointPattern],
    hub: usize,
    cap: Option<f64>,
) -> Result<CenterSolution> {
    let (k, _) = check_cell(cell)?;
    if hub >= cell.len() {
        return Err(Error::Input(format!(
            "hub index {} out of range for a cell of {}",
            hub,
            cell.len()
        )));
    }
    if k == 0 {
        return trivial(cell, k);
    }
    let mut perms = Vec::with_capacity(cell.len());
    let mut solves = 0;
    for (p, x) in cell.iter().enumerate() {
        if p == hub {
            perms.push((0..k).collect());
        } else {
            perms.push(align(cell[hub], x, cap)?);
            solves += 1;
        }
    }
    let cliques = CliqueAssignment::new(perms, k)?;
    Ok(CenterSolution {
        center: cliques.centers(cell)?,
        cliques,
        assignment_solves: solves,
    })
}

/// Multi-hub heuristic with uncapped costs.
pub fn center_multi_hub(cell: &[&PointPattern]) -> Result<CenterSolution> {
    center_multi_hub_capped(cell, None)
}

/// Runs the single-hub heuristic from every hub and keeps the center with
/// the smallest average cost; the lowest hub index wins ties. The returned
/// solve count covers the alignments only, not the scoring.
pub fn center_multi_hub_capped(cell: &[&PointPattern], cap: Option<f64>) -> Result<CenterSolution> {
    check_cell(cell)?;
    let mut best: Option<(f64, CenterSolution)> = None;
    let mut solves = 0;
    for hub in 0..cell.len() {
        let sol = center_single_hub_capped(cell, hub, cap)?;
        solves += sol.assignment_solves;
        let avg = average_cost(cell, &sol.center, cap)?;
        if best.as_ref().is_none_or(|(b, _)| avg < *b) {
            best = Some((avg, sol));
        }
    }
    let (_, mut sol) = best.expect("nonempty cell");
    sol.assignment_solves = solves;
    Ok(sol)
}

/// Modified single-hub heuristic with uncapped costs.
pub fn center_modified_single_hub(cell: &[&PointPattern], order: &[usize]) -> Result<CenterSolution> {
    center_modified_single_hub_capped(cell, order, None)
}

/// Aligns the patterns one by one, in `order`, to the running mean of those
/// already processed.
pub fn center_modified_single_hub_capped(
    cell: &[&PointPattern],
    order: &[usize],
    cap: Option<f64>,
) -> Result<CenterSolution> {
    let (k, d) = check_cell(cell)?;
    let n = cell.len();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Input(format!(
            "order must be a permutation of the {} cell members",
            n
        )));
    }
    if k == 0 {
        return trivial(cell, k);
    }

    let mut perms = vec![Vec::new(); n];
    perms[order[0]] = (0..k).collect();
    let mut running = cell[order[0]].coords().to_vec();
    for (r, &p) in order.iter().enumerate().skip(1) {
        let hub = PointPattern::new(d, running.clone())?;
        let perm = align(&hub, cell[p], cap)?;
        let w = r as f64;
        for (i, &j) in perm.iter().enumerate() {
            for (c, v) in running[i * d..(i + 1) * d].iter_mut().zip(cell[p].point(j)) {
                *c = (w * *c + v) / (w + 1.0);
            }
        }
        perms[p] = perm;
    }
    Ok(CenterSolution {
        center: PointPattern::new(d, running)?,
        cliques: CliqueAssignment::new(perms, k)?,
        assignment_solves: n - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::rho2;
    use crate::sampling::{stream_rng, GaussianFixedSource, PatternSource};
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random_cell(seed: u64, n: usize, k: usize) -> Vec<PointPattern> {
        let src = GaussianFixedSource::new(k, 2).unwrap();
        let mut rng = stream_rng(seed, 9);
        (0..n).map(|_| src.sample(&mut rng)).collect()
    }

    fn refs(cell: &[PointPattern]) -> Vec<&PointPattern> {
        cell.iter().collect()
    }

    fn avg_rho2(cell: &[&PointPattern], c: &PointPattern) -> f64 {
        cell.iter().map(|x| rho2(x, c).unwrap()).sum::<f64>() / cell.len() as f64
    }

    #[test]
    fn permutation_enumeration() {
        assert_eq!(permutations(1).len(), 1);
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        let mut dedup = p.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 24);
    }

    #[test]
    fn singleton_and_duplicate_cells() {
        let cell = random_cell(1, 1, 3);
        let x = &cell[0];
        for sol in [
            center_exact(&[x]).unwrap(),
            center_single_hub(&[x], 0).unwrap(),
            center_multi_hub(&[x]).unwrap(),
            center_modified_single_hub(&[x], &[0]).unwrap(),
        ] {
            assert_eq!(&sol.center, x);
            assert_eq!(sol.assignment_solves, 0);
        }
        let exact = center_exact(&[x, x]).unwrap();
        assert!(rho2(&exact.center, x).unwrap() < 1e-24);
    }

    #[test]
    fn two_pattern_cells_agree_with_brute_force() {
        for seed in 0..50 {
            let k = 1 + (seed as usize % 5);
            let cell = random_cell(seed, 2, k);
            let r = refs(&cell);
            let hub = center_single_hub(&r, 0).unwrap();
            let exact = center_exact(&r).unwrap();
            let modified = center_modified_single_hub(&r, &[0, 1]).unwrap();
            // brute-force pairing
            let best = permutations(k)
                .into_iter()
                .map(|p| (0..k).map(|i| sq_dist(cell[0].point(i), cell[1].point(p[i]))).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let midpoint_cost = best / 4.0;
            assert_relative_eq!(avg_rho2(&r, &hub.center), midpoint_cost, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(avg_rho2(&r, &exact.center), midpoint_cost, max_relative = 1e-9, epsilon = 1e-12);
            assert_eq!(hub.center, modified.center);
        }
    }

    #[test]
    fn exact_is_no_worse_than_heuristics_and_candidates() {
        for seed in 0..20 {
            let cell = random_cell(100 + seed, 3, 3);
            let r = refs(&cell);
            let exact = avg_rho2(&r, &center_exact(&r).unwrap().center);
            for hub in 0..3 {
                assert!(exact <= avg_rho2(&r, &center_single_hub(&r, hub).unwrap().center) + 1e-12);
            }
            assert!(exact <= avg_rho2(&r, &center_multi_hub(&r).unwrap().center) + 1e-12);
            assert!(exact <= avg_rho2(&r, &center_modified_single_hub(&r, &[2, 0, 1]).unwrap().center) + 1e-12);
            let mut rng = stream_rng(seed, 77);
            for _ in 0..200 {
                let c = PointPattern::new(2, (0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
                assert!(exact <= avg_rho2(&r, &c) + 1e-12);
            }
        }
    }

    #[test]
    fn clique_structure_and_cost() {
        let cell = random_cell(5, 6, 4);
        let r = refs(&cell);
        let mut order: Vec<usize> = (0..6).collect();
        order.shuffle(&mut stream_rng(5, 1));
        for sol in [
            center_single_hub(&r, 3).unwrap(),
            center_multi_hub(&r).unwrap(),
            center_modified_single_hub(&r, &order).unwrap(),
        ] {
            let cliques = sol.cliques.cliques(&r);
            assert_eq!(cliques.len(), 4);
            assert!(cliques.iter().all(|c| c.len() == 6));
            // union of cliques equals union of patterns
            let mut a: Vec<f64> = cliques.iter().flatten().flat_map(|p| p.iter().copied()).collect();
            let mut b: Vec<f64> = cell.iter().flat_map(|x| x.coords().iter().copied()).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
            // pairwise cost equals 2 n times the within-clique scatter
            let scatter: f64 = cliques
                .iter()
                .map(|c| {
                    let mx = c.iter().map(|p| p[0]).sum::<f64>() / 6.0;
                    let my = c.iter().map(|p| p[1]).sum::<f64>() / 6.0;
                    c.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum::<f64>()
                })
                .sum();
            assert_relative_eq!(sol.cliques.sum_cost(&r), 12.0 * scatter, max_relative = 1e-9);
        }
    }

    #[test]
    fn running_mean_equals_clique_means() {
        let cell = random_cell(8, 25, 4);
        let r = refs(&cell);
        let order: Vec<usize> = (0..25).rev().collect();
        for len in 1..=25 {
            let sub: Vec<&PointPattern> = order[..len].iter().map(|&p| r[p]).collect();
            let ord: Vec<usize> = (0..len).collect();
            let sol = center_modified_single_hub(&sub, &ord).unwrap();
            let means = sol.cliques.centers(&sub).unwrap();
            for (a, b) in sol.center.coords().iter().zip(means.coords()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_counts() {
        for n in 1..8 {
            let cell = random_cell(n as u64, n, 3);
            let r = refs(&cell);
            let order: Vec<usize> = (0..n).collect();
            assert_eq!(center_single_hub(&r, 0).unwrap().assignment_solves, n - 1);
            assert_eq!(center_modified_single_hub(&r, &order).unwrap().assignment_solves, n - 1);
            assert_eq!(center_multi_hub(&r).unwrap().assignment_solves, n * (n - 1));
        }
    }

    #[test]
    fn multi_hub_no_worse_than_first_hub() {
        for seed in 0..30 {
            let cell = random_cell(200 + seed, 8, 4);
            let r = refs(&cell);
            let multi = avg_rho2(&r, &center_multi_hub(&r).unwrap().center);
            let single = avg_rho2(&r, &center_single_hub(&r, 0).unwrap().center);
            assert!(multi <= single + 1e-12);
        }
    }

    #[test]
    fn outlier_hub_still_valid() {
        let mut cell = random_cell(3, 5, 3);
        cell.push(PointPattern::new(2, vec![50.0, 50.0, 60.0, 50.0, 55.0, 58.0]).unwrap());
        let r = refs(&cell);
        let far = center_single_hub(&r, 5).unwrap().center;
        let near = center_single_hub(&r, 0).unwrap().center;
        assert_eq!(far.len(), 3);
        assert_eq!(near.len(), 3);
    }

    #[test]
    fn errors() {
        let a = random_cell(1, 1, 3);
        let b = random_cell(2, 1, 2);
        assert!(center_single_hub(&[&a[0], &b[0]], 0).is_err());
        assert!(center_single_hub(&[&a[0]], 1).is_err());
        assert!(center_multi_hub(&[]).is_err());
        assert!(center_modified_single_hub(&[&a[0], &a[0]], &[0, 0]).is_err());
        let big = random_cell(3, 6, 4);
        assert!(matches!(center_exact(&refs(&big)), Err(Error::TooLarge(_))));
        assert!(CliqueAssignment::new(vec![vec![0, 0]], 2).is_err());
    }
}
