//! Bounds for a Poisson point process with uniform intensity on `[0,1)^2`
//! under USOSPA with cut-off `c`.
//!
//! Lower bound: a Shannon-type bound maximized over the slope `s`, keeping
//! only the first `k_max` cardinalities. For `k_max <= 1/(2 pi c^2)` and
//! `s >= 3/c^2` the objective is concave and golden-section search finds the
//! global maximum; otherwise a multi-start search is used and the result is
//! flagged.
//!
//! Upper bound: the grid construction with `N^2` cells, reached at
//! `D = mean / (6 N^2)`, with the factorial sum truncated at `N_max^2` terms.

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::patterns::RdPoint;

use super::optimize::maximize_concave_1d;
use super::special::{log_factorial, regularized_lower_gamma};

/// Number of log-spaced starting brackets for the non-concave search.
pub const MULTI_START_SEEDS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBoundParams {
    /// Mean cardinality.
    pub mean: f64,
    pub cutoff: f64,
    /// Cardinalities kept in the lower bound.
    pub k_max: usize,
    /// Grid resolution `N` of the upper bound.
    pub n_grid: usize,
    /// Truncation `N_max <= N` of the upper bound's factorial sum.
    pub n_max: usize,
    /// Search range for the slope; `None` means `[3/c^2, 1e6/c^2]`.
    pub s_range: Option<(f64, f64)>,
    /// Differential entropy of the intensity density (zero for the unit square).
    pub density_entropy: f64,
    /// Golden-section tolerance on `s`.
    pub tol: f64,
}

impl PoissonBoundParams {
    /// Defaults: `k_max = floor(1/(2 pi c^2))`, smallest admissible `N`,
    /// `N_max = min(N, 10)`.
    pub fn new(mean: f64, cutoff: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Config(format!("mean cardinality must be positive, got {}", mean)));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Config(format!("cut-off must be positive, got {}", cutoff)));
        }
        let n_grid = min_grid(cutoff);
        Ok(Self {
            mean,
            cutoff,
            k_max: concave_k_max(cutoff),
            n_grid,
            n_max: default_n_max(n_grid),
            s_range: None,
            density_entropy: 0.0,
            tol: 1e-9,
        })
    }

    pub fn with_grid(mut self, n_grid: usize) -> Self {
        self.n_grid = n_grid;
        self.n_max = default_n_max(n_grid);
        self
    }

    pub fn s_range(&self) -> (f64, f64) {
        let c2 = self.cutoff * self.cutoff;
        self.s_range.unwrap_or((3.0 / c2, 1e6 / c2))
    }

    /// Whether the lower-bound objective is guaranteed concave on the search range.
    pub fn is_concave_regime(&self) -> bool {
        let c2 = self.cutoff * self.cutoff;
        let (s_lo, _) = self.s_range();
        self.k_max as f64 <= 1.0 / (2.0 * PI * c2) && s_lo * c2 >= 3.0 * (1.0 - 1e-12)
    }

    /// Distortion reached by the grid construction, `mean / (6 N^2)`.
    pub fn upper_distortion(&self) -> f64 {
        self.mean / (6.0 * (self.n_grid * self.n_grid) as f64)
    }
}

/// `floor(1/(2 pi c^2))`, the largest `k_max` with guaranteed concavity.
pub fn concave_k_max(cutoff: f64) -> usize {
    (1.0 / (2.0 * PI * cutoff * cutoff)).floor() as usize
}

/// Smallest grid `N` with `N >= 1/(sqrt(2) c)`.
pub fn min_grid(cutoff: f64) -> usize {
    let n = (1.0 / (SQRT_2 * cutoff)).ceil().max(1.0) as usize;
    if grid_admissible(n, cutoff) {
        n
    } else {
        n + 1
    }
}

pub fn default_n_max(n_grid: usize) -> usize {
    n_grid.min(10)
}

fn grid_admissible(n_grid: usize, cutoff: f64) -> bool {
    n_grid as f64 * SQRT_2 * cutoff >= 1.0
}

/// `k log(e^{-s c^2}(1 - pi c^2 k - pi k / s) + pi k / s)`, the log of the
/// per-cardinality normalizer on the unit square.
pub fn poisson_log_gamma_tilde_unit_square(k: usize, s: f64, cutoff: f64) -> Result<f64> {
    let c2 = cutoff * cutoff;
    if k == 0 {
        return Err(Error::Domain("cardinality must be at least 1".into()));
    }
    if !(s * c2 >= 1.0 - 1e-12) {
        return Err(Error::Domain(format!("need s >= 1/c^2, got s = {} with c = {}", s, cutoff)));
    }
    let kf = k as f64;
    let pk_s = PI * kf / s;
    let arg = (-s * c2).exp() * (1.0 - PI * c2 * kf - pk_s) + pk_s;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::Numeric(format!(
            "log argument {} is not positive at k = {}, s = {}, c = {}",
            arg, k, s, cutoff
        )));
    }
    Ok(kf * arg.ln())
}

/// Lebesgue measure of the ball of radius `c` in `R^d`.
pub fn ball_volume(d: u32, c: f64) -> f64 {
    let h = d as f64 / 2.0;
    (h * PI.ln() + d as f64 * c.ln() - ln_gamma(h + 1.0)).exp()
}

/// `int_{|x| <= c} exp(-s |x|^2) dx = (pi/s)^{d/2} P(d/2, s c^2)`.
pub fn ball_gaussian_integral(d: u32, c: f64, s: f64) -> f64 {
    let h = d as f64 / 2.0;
    (PI / s).powf(h) * regularized_lower_gamma(h, s * c * c)
}

/// Log of the normalizer for a general dimension `d` and support of measure
/// `area`; equals [`poisson_log_gamma_tilde_unit_square`] for `d = 2`,
/// `area = 1`.
pub fn poisson_gamma_tilde_general(k: usize, s: f64, cutoff: f64, d: u32, area: f64) -> Result<f64> {
    let c2 = cutoff * cutoff;
    if k == 0 || d == 0 {
        return Err(Error::Domain(format!("need k >= 1 and d >= 1, got k={} d={}", k, d)));
    }
    if !(area > 0.0) {
        return Err(Error::Domain(format!("support measure must be positive, got {}", area)));
    }
    if !(s * c2 >= 1.0 - 1e-12) {
        return Err(Error::Domain(format!("need s >= 1/c^2, got s = {} with c = {}", s, cutoff)));
    }
    let e = (-s * c2).exp();
    let kf = k as f64;
    let arg = e * area + kf * (-e * ball_volume(d, cutoff) + ball_gaussian_integral(d, cutoff, s));
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::Numeric(format!(
            "log argument {} is not positive at k = {}, s = {}, c = {}, d = {}",
            arg, k, s, cutoff, d
        )));
    }
    Ok(kf * arg.ln())
}

/// Poisson pmf `e^{-mean} mean^k / k!`.
pub fn poisson_pmf(mean: f64, k: usize) -> f64 {
    (-mean + k as f64 * mean.ln() - log_factorial(k as u64)).exp()
}

/// Result of the lower-bound maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonLower {
    /// Raw bound in nats; may be negative.
    pub value: f64,
    pub s_opt: f64,
    /// Set when concavity is not guaranteed and the value is the best local
    /// maximum found.
    pub nonconcave: bool,
}

/// The lower-bound objective at slope `s`.
pub fn poisson_lower_objective(params: &PoissonBoundParams, distortion: f64, s: f64) -> Result<f64> {
    let mut acc = params.mean * params.density_entropy - s * distortion;
    for k in 1..=params.k_max {
        acc -= poisson_pmf(params.mean, k) * poisson_log_gamma_tilde_unit_square(k, s, params.cutoff)?;
    }
    Ok(acc)
}

/// Lower bound on the RD function at distortion `D`.
pub fn poisson_lower_unit_square(params: &PoissonBoundParams, distortion: f64) -> Result<PoissonLower> {
    if !(distortion > 0.0 && distortion.is_finite()) {
        return Err(Error::Domain(format!("distortion must be positive, got {}", distortion)));
    }
    let (s_lo, s_hi) = params.s_range();
    let c2 = params.cutoff * params.cutoff;
    if !(s_lo < s_hi) || !s_hi.is_finite() || s_lo * c2 < 1.0 - 1e-12 {
        return Err(Error::Config(format!(
            "slope range [{}, {}] must be nonempty, finite and start at or above 1/c^2 = {}",
            s_lo,
            s_hi,
            1.0 / c2
        )));
    }

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let objective = |s: f64| match poisson_lower_objective(params, distortion, s) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let run = |lo: f64, hi: f64| {
        maximize_concave_1d(&objective, lo, hi, params.tol).map_err(|e| failure.borrow_mut().take().unwrap_or(e))
    };

    if params.is_concave_regime() {
        let (s_opt, value) = run(s_lo, s_hi)?;
        return Ok(PoissonLower {
            value,
            s_opt,
            nonconcave: false,
        });
    }

    let ratio = (s_hi / s_lo).ln() / (MULTI_START_SEEDS - 1) as f64;
    let seeds: Vec<f64> = (0..MULTI_START_SEEDS)
        .map(|i| s_lo * (ratio * i as f64).exp())
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..MULTI_START_SEEDS {
        let lo = seeds[i.saturating_sub(1)];
        let hi = seeds[(i + 1).min(MULTI_START_SEEDS - 1)];
        let cand = run(lo, hi)?;
        if best.is_none_or(|b| cand.1 > b.1) {
            best = Some(cand);
        }
    }
    let (s_opt, value) = best.expect("at least one seed");
    Ok(PoissonLower {
        value,
        s_opt,
        nonconcave: true,
    })
}

/// Upper bound rate at `D = mean / (6 N^2)` with the factorial sum truncated
/// at `N_max^2` terms.
pub fn poisson_upper_rate(mean: f64, n_grid: usize, n_max: usize) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::Config(format!("mean cardinality must be positive, got {}", mean)));
    }
    if n_grid == 0 || n_max == 0 || n_max > n_grid {
        return Err(Error::Config(format!(
            "need 1 <= N_max <= N, got N = {}, N_max = {}",
            n_grid, n_max
        )));
    }
    let cells = (n_grid * n_grid) as f64;
    let terms = n_max * n_max;
    let ln_mean = mean.ln();

    let mut sum = 0.0;
    // log of prod_{i<k} (1 - i/N^2) = log(C(N^2, k) k! / N^{2k})
    let mut log_distinct = 0.0;
    for k in 1..=terms {
        log_distinct += (-((k - 1) as f64) / cells).ln_1p();
        let log_kf = log_factorial(k as u64);
        let pmf = (-mean + k as f64 * ln_mean - log_kf).exp();
        sum += pmf * log_kf * -log_distinct.exp_m1();
    }

    let tail = poisson_tail(mean, terms.saturating_sub(1));
    let rate = mean + mean * (cells / mean).ln() + sum + tail * mean * mean;
    if !rate.is_finite() {
        return Err(Error::Numeric(format!(
            "upper bound is {} at N = {}, N_max = {}",
            rate, n_grid, n_max
        )));
    }
    Ok(rate)
}

/// `P(K >= start)` for `K ~ Poisson(mean)`.
fn poisson_tail(mean: f64, start: usize) -> f64 {
    let head: f64 = (0..start).map(|k| poisson_pmf(mean, k)).sum();
    if head < 0.5 {
        return (1.0 - head).max(0.0);
    }
    let mut tail = 0.0;
    let mut k = start;
    loop {
        let p = poisson_pmf(mean, k);
        tail += p;
        if (k as f64 > mean && p <= tail * 1e-17) || p == 0.0 {
            break;
        }
        k += 1;
    }
    tail
}

/// Upper bound point `(mean / (6 N^2), R)` for the grid construction.
pub fn poisson_upper_unit_square(params: &PoissonBoundParams) -> Result<RdPoint> {
    if !grid_admissible(params.n_grid, params.cutoff) {
        return Err(Error::Domain(format!(
            "grid construction needs N >= 1/(sqrt(2) c) = {:.4}, got N = {}",
            1.0 / (SQRT_2 * params.cutoff),
            params.n_grid
        )));
    }
    let rate = poisson_upper_rate(params.mean, params.n_grid, params.n_max)?;
    Ok(RdPoint::new(params.upper_distortion(), rate, "poisson_upper")?
        .with_param("lambda", params.mean)
        .with_param("cutoff", params.cutoff)
        .with_param("N", params.n_grid)
        .with_param("Nmax", params.n_max))
}
