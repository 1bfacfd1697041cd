//! Self-check suites run by `pprd verify`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bounds::poisson::poisson_lower_objective;
use crate::bounds::{
    chi2_cdf, default_epsilon, gaussian_pp_lower, gaussian_pp_upper, gaussian_pp_upper_terms,
    gaussian_vector_rd, log_factorial, poisson_lower_unit_square, poisson_upper_unit_square,
    PoissonBoundParams,
};
use crate::codebook::{
    average_cost, center_exact, center_modified_single_hub, center_multi_hub, center_single_hub,
    draw_training_set, estimate_distortion, lbg_train, nearest_codeword, random_codebook, Heuristic,
    LbgConfig,
};
use crate::distortion::{rho2, solve_assignment, usospa, usospa_lower_bounds};
use crate::error::{Error, Result};
use crate::patterns::{Codebook, CodebookMeta, DistortionSpec, PointPattern};
use crate::sampling::{
    estimate_quantized_pair_distortion, monte_carlo, sample_poisson_count, stream_rng, streams,
    GaussianFixedSource, PatternSource, PoissonUnitSquareSource, SimRng,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Distortion,
    Bounds,
    Codebook,
    Sampling,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "distortion" => Suite::Distortion,
            "bounds" => Suite::Bounds,
            "codebook" => Suite::Codebook,
            "sampling" => Suite::Sampling,
            "all" => Suite::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite '{}'; expected distortion, bounds, codebook, sampling or all",
                    other
                )))
            }
        })
    }
}

/// Outcome of one invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: String,
    pub expected: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: observed {}; expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected
        )
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, name: &str, observed: impl fmt::Display, expected: impl fmt::Display, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            observed: observed.to_string(),
            expected: expected.to_string(),
            pass,
        });
    }

    fn run(&mut self, name: &str, f: impl FnOnce(&mut Report) -> Result<()>) {
        if let Err(e) = f(self) {
            self.check(name, format!("error: {}", e), "no error", false);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out: String = self.checks.iter().map(|c| format!("{}\n", c)).collect();
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        out.push_str(&format!(
            "{} checks, {} failed\n",
            self.checks.len(),
            failed
        ));
        out
    }
}

/// Runs `suite` with randomness from stream `VERIFY` of `seed`.
pub fn run_suite(suite: Suite, seed: u64) -> Report {
    let mut r = Report::default();
    let mut rng = stream_rng(seed, streams::VERIFY);
    if matches!(suite, Suite::Distortion | Suite::All) {
        distortion_suite(&mut r, &mut rng);
    }
    if matches!(suite, Suite::Bounds | Suite::All) {
        bounds_suite(&mut r);
    }
    if matches!(suite, Suite::Codebook | Suite::All) {
        codebook_suite(&mut r, &mut rng, seed);
    }
    if matches!(suite, Suite::Sampling | Suite::All) {
        sampling_suite(&mut r, &mut rng, seed);
    }
    r
}

fn random_pattern(rng: &mut SimRng, k: usize) -> PointPattern {
    PointPattern::new(2, (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("valid coordinates")
}

fn brute_force(cost: &[f64], n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum());
    });
    best
}

fn permute(p: &mut [usize], i: usize, visit: &mut dyn FnMut(&[usize])) {
    if i == p.len() {
        visit(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, visit);
        p.swap(i, j);
    }
}

fn distortion_suite(r: &mut Report, rng: &mut SimRng) {
    r.run("distortion/assignment", |r| {
        let mut worst: f64 = 0.0;
        for n in 2..=6 {
            for _ in 0..200 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
                let got = solve_assignment(&cost, n)?.total_cost;
                worst = worst.max((got - brute_force(&cost, n)).abs());
            }
        }
        r.check("distortion/assignment_vs_brute_force", format!("max |diff| = {:.3e}", worst), "< 1e-9", worst < 1e-9);
        Ok(())
    });
    r.run("distortion/rho2", |r| {
        let (mut perm_err, mut sym_err, mut order_viol): (f64, f64, usize) = (0.0, 0.0, 0);
        for _ in 0..1000 {
            let k = rng.random_range(1..=8);
            let x = random_pattern(rng, k);
            let y = random_pattern(rng, k);
            let v = rho2(&x, &y)?;
            let mut pts: Vec<&[f64]> = x.points().collect();
            pts.shuffle(rng);
            let xs = PointPattern::from_points(2, &pts)?;
            perm_err = perm_err.max((rho2(&xs, &y)? - v).abs());
            sym_err = sym_err.max((rho2(&y, &x)? - v).abs());
            let vec_err: f64 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
            if v > vec_err + 1e-12 {
                order_viol += 1;
            }
        }
        r.check("distortion/rho2_permutation_invariance", format!("{:.3e}", perm_err), "< 1e-12", perm_err < 1e-12);
        r.check("distortion/rho2_symmetry", format!("{:.3e}", sym_err), "< 1e-12", sym_err < 1e-12);
        r.check("distortion/rho2_below_vector_error", format!("{} violations", order_viol), "0", order_viol == 0);
        Ok(())
    });
    r.run("distortion/usospa", |r| {
        let c = 0.5;
        let mut viol = 0;
        for _ in 0..1000 {
            let (nx, ny) = (rng.random_range(0..=8), rng.random_range(0..=8));
            let x = random_pattern(rng, nx);
            let y = random_pattern(rng, ny);
            let v = usospa(&x, &y, c)?;
            let lb = usospa_lower_bounds(&x, &y, c)?;
            let card = (x.len().abs_diff(y.len())) as f64 * c * c;
            let cap = x.len().max(y.len()) as f64 * c * c;
            if lb.best() > v + 1e-12 || v + 1e-12 < card || v > cap + 1e-12 || (usospa(&y, &x, c)? - v).abs() > 1e-12 {
                viol += 1;
            }
        }
        r.check("distortion/usospa_nearest_neighbour_bounds", format!("{} violations", viol), "0", viol == 0);
        Ok(())
    });
}

fn bounds_suite(r: &mut Report) {
    r.run("bounds/gaussian", |r| {
        let v = gaussian_vector_rd(4, 2, 0.8)?;
        r.check("bounds/gaussian_vector_rd(0.8)", format!("{:.6}", v), "9.2103 +- 1e-4", (v - 9.2103).abs() < 1e-4);
        let l = gaussian_pp_lower(4, 2, 0.8)?;
        r.check("bounds/gaussian_lower(0.8)", format!("{:.6}", l), "6.0323 +- 1e-4", (l - 6.0323).abs() < 1e-4);
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let dist = 1e-6 * 10f64.powf(6.0 * i as f64 / 19.0);
            let vec = gaussian_vector_rd(1, 2, dist)?;
            let up = gaussian_pp_upper(1, 2, dist, default_epsilon(1, 2, dist))?;
            worst = worst.max((up - vec).abs()).max((gaussian_pp_lower(1, 2, dist)? - vec).abs());
        }
        r.check("bounds/gaussian_k1_collapse", format!("{:.3e}", worst), "< 1e-9", worst < 1e-9);
        let gap = |dist: f64| -> Result<f64> {
            Ok(gaussian_pp_upper_terms(4, 2, dist, default_epsilon(4, 2, dist))?.corrections())
        };
        let (g2, g4, g6) = (gap(1e-2)?, gap(1e-4)?, gap(1e-6)?);
        r.check(
            "bounds/gaussian_gap_shrinks",
            format!("{:.3e} > {:.3e} > {:.3e}", g2, g4, g6),
            "strictly decreasing, last < 0.05",
            g2 > g4 && g4 > g6 && g6 < 0.05,
        );
        Ok(())
    });
    r.run("bounds/poisson", |r| {
        let p = PoissonBoundParams::new(10.0, 0.1)?;
        r.check("bounds/poisson_default_kmax", p.k_max, 15, p.k_max == 15);
        let mut worst: f64 = 0.0;
        let mut beaten = false;
        for dist in [1e-4, 1e-3, 1e-2] {
            let opt = poisson_lower_unit_square(&p, dist)?;
            let (lo, hi) = (300.0f64, 1e6f64);
            let n = 100_000;
            let mut grid = f64::NEG_INFINITY;
            for i in 0..n {
                let s = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
                grid = grid.max(poisson_lower_objective(&p, dist, s)?);
            }
            worst = worst.max((opt.value - grid).abs());
            beaten |= grid > opt.value + 1e-12;
        }
        r.check(
            "bounds/poisson_optimizer_vs_dense_grid",
            format!("max |diff| = {:.3e}", worst),
            "< 1e-6 and grid never better",
            worst < 1e-6 && !beaten,
        );
        let d8 = poisson_upper_unit_square(&p.clone().with_grid(8))?.distortion;
        let d207 = poisson_upper_unit_square(&p.clone().with_grid(207))?.distortion;
        r.check(
            "bounds/poisson_upper_endpoints",
            format!("{:.4e}, {:.4e}", d8, d207),
            "2.604e-2 +- 1e-5, 3.890e-5 +- 1e-8",
            (d8 - 2.604e-2).abs() < 1e-5 && (d207 - 3.890e-5).abs() < 1e-8,
        );
        let mut bad = Vec::new();
        for n in 8..=207 {
            let up = poisson_upper_unit_square(&p.clone().with_grid(n))?;
            let lo = poisson_lower_unit_square(&p, up.distortion)?;
            if !up.rate.is_finite() || up.rate < lo.value {
                bad.push(n);
            }
        }
        r.check("bounds/poisson_upper_finite_and_above_lower", format!("{} bad N {:?}", bad.len(), bad), "0", bad.is_empty());
        Ok(())
    });
    r.run("bounds/special", |r| {
        let v = chi2_cdf(2.0, 2);
        let e = 1.0 - (-1.0f64).exp();
        r.check("bounds/chi2_cdf(2;2)", format!("{:.12}", v), format!("{:.12}", e), (v - e).abs() < 1e-10);
        let mut worst: f64 = 0.0;
        let mut acc = 0.0;
        for k in 1..=500u64 {
            acc += (k as f64).ln();
            worst = worst.max(((log_factorial(k) - acc) / acc.max(1e-300)).abs());
        }
        r.check("bounds/log_factorial_vs_log_sum", format!("{:.3e}", worst), "< 1e-12 relative", worst < 1e-12);
        Ok(())
    });
}

fn codebook_suite(r: &mut Report, rng: &mut SimRng, seed: u64) {
    r.run("codebook/centers", |r| {
        let src = GaussianFixedSource::new(3, 2)?;
        let mut viol = 0;
        for _ in 0..20 {
            let cell: Vec<PointPattern> = (0..3).map(|_| src.sample(rng)).collect();
            let refs: Vec<&PointPattern> = cell.iter().collect();
            let exact = average_cost(&refs, &center_exact(&refs)?.center, None)?;
            let mut others = vec![
                center_multi_hub(&refs)?.center,
                center_modified_single_hub(&refs, &[1, 2, 0])?.center,
            ];
            for hub in 0..3 {
                others.push(center_single_hub(&refs, hub)?.center);
            }
            for _ in 0..200 {
                others.push(PointPattern::new(2, (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())?);
            }
            for c in &others {
                if exact > average_cost(&refs, c, None)? + 1e-12 {
                    viol += 1;
                }
            }
        }
        r.check("codebook/exact_center_optimal", format!("{} violations", viol), "0", viol == 0);

        let cell: Vec<PointPattern> = (0..7).map(|_| src.sample(rng)).collect();
        let refs: Vec<&PointPattern> = cell.iter().collect();
        let order: Vec<usize> = (0..7).collect();
        let counts = (
            center_modified_single_hub(&refs, &order)?.assignment_solves,
            center_multi_hub(&refs)?.assignment_solves,
        );
        r.check("codebook/assignment_solve_counts", format!("{:?}", counts), "(6, 42)", counts == (6, 42));
        Ok(())
    });
    r.run("codebook/nearest", |r| {
        let p = |v: f64| PointPattern::new(1, vec![v]).expect("one coordinate");
        let cb = Codebook::new(
            vec![p(9.0), p(4.0), p(-1.0), p(6.0), p(4.0), p(1.0)],
            DistortionSpec::FixedCardinalitySquared,
            CodebookMeta::untrained("verify", 0),
        )?;
        let tie = nearest_codeword(&p(0.0), &cb)?.0;
        let dup = nearest_codeword(&p(4.0), &cb)?.0;
        r.check("codebook/nearest_tie_smallest_index", format!("{}, {}", tie, dup), "2, 1", tie == 2 && dup == 1);
        Ok(())
    });
    r.run("codebook/lbg", |r| {
        let src = GaussianFixedSource::new(2, 2)?;
        let set = draw_training_set(&src, 1600, seed);
        let spec = DistortionSpec::FixedCardinalitySquared;
        let trained = lbg_train(&set, 16, spec, Heuristic::ModifiedSingleHub, &LbgConfig::default(), seed)?;
        let again = lbg_train(&set, 16, spec, Heuristic::ModifiedSingleHub, &LbgConfig::default(), seed)?;
        r.check(
            "codebook/lbg_reproducible",
            trained.to_text() == again.to_text(),
            true,
            trained.to_text() == again.to_text(),
        );
        let random = random_codebook(&src, 16, spec, seed)?;
        let a = estimate_distortion(&trained, &src, 10_000, seed)?.mean;
        let b = estimate_distortion(&random, &src, 10_000, seed)?.mean;
        r.check("codebook/lbg_beats_random", format!("{:.4} vs {:.4}", a, b), "trained < 0.9 random", a < 0.9 * b);
        Ok(())
    });
}

fn sampling_suite(r: &mut Report, rng: &mut SimRng, seed: u64) {
    r.run("sampling/poisson_counts", |r| {
        let mean = 10.0;
        let n = 100_000;
        let mut counts = [0usize; 26];
        for _ in 0..n {
            counts[sample_poisson_count(mean, rng).min(25)] += 1;
        }
        let mut stat = 0.0;
        let mut head = 0.0;
        for (k, &obs) in counts.iter().enumerate() {
            let p = if k < 25 {
                let p = crate::bounds::poisson::poisson_pmf(mean, k);
                head += p;
                p
            } else {
                1.0 - head
            };
            let exp = p * n as f64;
            stat += (obs as f64 - exp).powi(2) / exp;
        }
        let pval = 1.0 - chi2_cdf(stat, 25);
        r.check("sampling/poisson_count_chi2", format!("p = {:.4}", pval), "> 0.001", pval > 1e-3);
        Ok(())
    });
    r.run("sampling/uniform", |r| {
        let src = PoissonUnitSquareSource::new(10.0)?;
        let mut xs = Vec::new();
        while xs.len() < 20_000 {
            xs.extend(src.sample(rng).points().map(|p| p[0]));
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 0.1% critical value of the Kolmogorov distribution
        let crit = 1.95 / n.sqrt();
        r.check("sampling/uniform_ks", format!("D = {:.5}", ks), format!("< {:.5}", crit), ks < crit);
        Ok(())
    });
    r.run("sampling/monte_carlo", |r| {
        let f = |rng: &mut SimRng| Ok(rng.random::<f64>());
        let a = monte_carlo(5000, seed, 7, f)?;
        let b = monte_carlo(5000, seed, 7, f)?;
        r.check("sampling/monte_carlo_reproducible", a == b, true, a == b);
        let est = estimate_quantized_pair_distortion(10.0, 10, 0.1, 20_000, seed)?;
        let dev = (est.mean - 1.0 / 60.0).abs() / est.stderr;
        r.check(
            "sampling/grid_pair_distortion",
            format!("{:.6} +- {:.6}", est.mean, est.stderr),
            "1/60 within 4 stderr",
            dev < 4.0,
        );
        Ok(())
    });
}
