//! Seedable samplers for the source models and a reproducible parallel
//! Monte Carlo driver.
//!
//! All randomness comes from [`SimRng`] (ChaCha8). A run is identified by a
//! `u64` seed; independent sub-streams are obtained with
//! [`stream_rng`]`(seed, stream)`, which sets ChaCha's 64-bit stream id and
//! therefore never overlaps another stream of the same seed. Stream ids are
//! partitioned by purpose, see [`streams`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::distortion::usospa;
use crate::error::{Error, Result};
use crate::patterns::PointPattern;

pub type SimRng = ChaCha8Rng;

/// Stream id ranges reserved for each consumer of a run seed.
pub mod streams {
    /// LBG initialisation, re-seeding and heuristic orderings.
    pub const TRAINING: u64 = 0;
    /// Generation of the training set.
    pub const TRAINING_SET: u64 = 1;
    /// Monte Carlo evaluation; chunk `i` uses `EVALUATION + i`.
    pub const EVALUATION: u64 = 1 << 40;
    /// Baseline codebooks drawn from the source.
    pub const BASELINE: u64 = 1 << 41;
    /// Verification suites.
    pub const VERIFY: u64 = 1 << 42;
}

/// Deterministic generator for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Anything that produces random point patterns.
pub trait PatternSource: Sync {
    fn dim(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointPattern;
}

/// `k` i.i.d. standard normal points in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFixedSource {
    k: usize,
    d: usize,
}

impl GaussianFixedSource {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Config(format!(
                "Gaussian source needs k >= 1 and d >= 1, got k={} d={}",
                k, d
            )));
        }
        Ok(Self { k, d })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl PatternSource for GaussianFixedSource {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointPattern {
        let coords = (0..self.k * self.d)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        PointPattern::new(self.d, coords).expect("k*d coordinates")
    }
}

pub fn sample_gaussian_fixed<R: Rng + ?Sized>(
    source: &GaussianFixedSource,
    rng: &mut R,
) -> PointPattern {
    source.sample(rng)
}

/// Poisson point process on `[0,1)^2` with uniform intensity and mean
/// cardinality `mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonUnitSquareSource {
    mean: f64,
}

impl PoissonUnitSquareSource {
    pub fn new(mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Config(format!(
                "mean cardinality must be positive, got {}",
                mean
            )));
        }
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl PatternSource for PoissonUnitSquareSource {
    fn dim(&self) -> usize {
        2
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointPattern {
        let k = sample_poisson_count(self.mean, rng);
        uniform_square(k, rng)
    }
}

pub fn sample_poisson_unit_square<R: Rng + ?Sized>(
    source: &PoissonUnitSquareSource,
    rng: &mut R,
) -> PointPattern {
    source.sample(rng)
}

/// Inversion by sequential CDF walk for `mean <= 30`, PTRS rejection above.
pub fn sample_poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean > 30.0 {
        let dist = Poisson::new(mean).expect("positive finite mean");
        return dist.sample(rng) as usize;
    }
    let u: f64 = rng.random();
    let mut k = 0usize;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // The walk stops once the pmf underflows; the remaining mass is < 1e-300.
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn uniform_square<R: Rng + ?Sized>(k: usize, rng: &mut R) -> PointPattern {
    let coords = (0..2 * k).map(|_| rng.random::<f64>()).collect();
    PointPattern::new(2, coords).expect("even coordinate count")
}

/// Draws a pair `(X, Y)` from the grid construction on `[0,1)^2`.
///
/// `Y` holds `k` i.i.d. uniform picks among the `N^2` cell centres
/// `((2 j1 - 1) / 2N, (2 j2 - 1) / 2N)`. Each point of `X` is uniform on the
/// cell of its partner in `Y` under a uniformly random pairing, so `X` is
/// marginally `k` i.i.d. uniform points on the square.
pub fn sample_quantized_pair<R: Rng + ?Sized>(
    n_grid: usize,
    k: usize,
    rng: &mut R,
) -> Result<(PointPattern, PointPattern)> {
    if n_grid == 0 {
        return Err(Error::Config("grid size N must be at least 1".into()));
    }
    let n = n_grid as f64;
    let half = 0.5 / n;
    let mut centres = Vec::with_capacity(2 * k);
    for _ in 0..k {
        let j1 = rng.random_range(1..=n_grid) as f64;
        let j2 = rng.random_range(1..=n_grid) as f64;
        centres.push((2.0 * j1 - 1.0) / (2.0 * n));
        centres.push((2.0 * j2 - 1.0) / (2.0 * n));
    }
    let mut pairing: Vec<usize> = (0..k).collect();
    pairing.shuffle(rng);
    let mut xs = Vec::with_capacity(2 * k);
    for &j in &pairing {
        for axis in 0..2 {
            let offset = rng.random::<f64>() * (2.0 * half) - half;
            // Clamp guards the half-open cell against rounding at the upper edge.
            let v = (centres[2 * j + axis] + offset).clamp(0.0, 1.0 - f64::EPSILON / 2.0);
            xs.push(v);
        }
    }
    Ok((PointPattern::new(2, xs)?, PointPattern::new(2, centres)?))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Samples per Monte Carlo chunk; chunk `i` draws from its own stream.
pub const MC_CHUNK: usize = 1024;

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + delta * b.n / n,
            m2: a.m2 + b.m2 + delta * delta * a.n * b.n / n,
        }
    }
}

fn pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        1 => parts[0],
        len => {
            let (a, b) = parts.split_at(len / 2);
            Moments::merge(pairwise(a), pairwise(b))
        }
    }
}

/// Estimates `E[f]` from `n` draws split into fixed-size chunks evaluated in
/// parallel. The result depends only on `(n, seed, stream_base)`, never on
/// the thread count.
pub fn monte_carlo<F>(n: usize, seed: u64, stream_base: u64, f: F) -> Result<Estimate>
where
    F: Fn(&mut SimRng) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(Error::Config("Monte Carlo needs at least 2 samples".into()));
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream_base + c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut m = Moments {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..len {
                let v = f(&mut rng)?;
                m.n += 1.0;
                let delta = v - m.mean;
                m.mean += delta / m.n;
                m.m2 += delta * (v - m.mean);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let total = pairwise(&parts);
    let var = total.m2 / (total.n - 1.0);
    Ok(Estimate {
        mean: total.mean,
        stderr: (var / total.n).sqrt(),
        n,
    })
}

/// Monte Carlo estimate of `E[usospa(X, Y)]` for the grid construction with
/// cardinality `K ~ Poisson(mean)`.
pub fn estimate_quantized_pair_distortion(
    mean: f64,
    n_grid: usize,
    cutoff: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    PoissonUnitSquareSource::new(mean)?;
    monte_carlo(n_samples, seed, streams::EVALUATION, |rng| {
        let k = sample_poisson_count(mean, rng);
        let (x, y) = sample_quantized_pair(n_grid, k, rng)?;
        usospa(&x, &y, cutoff)
    })
}
