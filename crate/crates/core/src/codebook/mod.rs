//! LBG codebook training and Monte Carlo evaluation.
//!
//! Training alternates a nearest-codeword partition of the training set with
//! a center computation per cell. Cells left empty are re-seeded from a
//! random training sample. Heuristic centers do not guarantee a monotone
//! decrease, so the best codebook seen is returned.

pub mod center;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::distortion::usospa;
use crate::error::{Error, Result};
use crate::patterns::{Codebook, CodebookMeta, DistortionSpec, PointPattern, RdPoint};
use crate::sampling::{monte_carlo, stream_rng, streams, Estimate, PatternSource, SimRng};

pub use center::{
    average_cost, center_exact, center_modified_single_hub, center_multi_hub, center_single_hub,
    CenterSolution, CliqueAssignment,
};

/// Attempts at drawing `M` pairwise distinct initial codewords.
pub const INIT_ATTEMPTS: usize = 100;

/// Stream for training the cardinality-`k` codebook of a family.
fn per_cardinality_stream(k: usize) -> u64 {
    (1 << 32) + k as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    Exact,
    SingleHub,
    MultiHub,
    ModifiedSingleHub,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::Exact,
        Heuristic::SingleHub,
        Heuristic::MultiHub,
        Heuristic::ModifiedSingleHub,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Exact => "exact",
            Heuristic::SingleHub => "single_hub",
            Heuristic::MultiHub => "multi_hub",
            Heuristic::ModifiedSingleHub => "modified_single_hub",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown heuristic '{}'; expected exact, single_hub, multi_hub or modified_single_hub",
                    s
                ))
            })
    }
}

/// Maps a pattern to a codeword index and the distortion incurred.
pub trait Encoder: Sync {
    fn encode(&self, x: &PointPattern) -> Result<(usize, f64)>;

    /// Total number of codewords.
    fn size(&self) -> usize;

    /// `log M` in nats.
    fn rate(&self) -> f64 {
        (self.size() as f64).ln()
    }
}

/// Index and distortion of the nearest codeword; ties go to the smallest index.
pub fn nearest_codeword(x: &PointPattern, cb: &Codebook) -> Result<(usize, f64)> {
    nearest_in(x, &cb.codewords, &cb.distortion)
}

fn nearest_in(x: &PointPattern, codewords: &[PointPattern], spec: &DistortionSpec) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, cw) in codewords.iter().enumerate() {
        let v = spec.eval(x, cw)?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((j, v));
        }
    }
    best.ok_or_else(|| Error::Input("codebook is empty".into()))
}

impl Encoder for Codebook {
    fn encode(&self, x: &PointPattern) -> Result<(usize, f64)> {
        nearest_codeword(x, self)
    }

    fn size(&self) -> usize {
        Codebook::size(self)
    }
}

/// One USOSPA codebook per cardinality.
///
/// A pattern whose cardinality has its own codebook is encoded within it;
/// any other pattern is encoded against every codeword of the family.
/// Indices run over the concatenation of the codebooks in cardinality order.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookFamily {
    pub cutoff: f64,
    books: BTreeMap<usize, Codebook>,
}

impl CodebookFamily {
    pub fn new(cutoff: f64, books: Vec<Codebook>) -> Result<Self> {
        let spec = DistortionSpec::usospa(cutoff)?;
        let mut map = BTreeMap::new();
        let mut dim = None;
        for cb in books {
            let k = cb.codewords[0].len();
            if cb.codewords.iter().any(|c| c.len() != k) {
                return Err(Error::Input("a family codebook mixes cardinalities".into()));
            }
            if *dim.get_or_insert(cb.dim()) != cb.dim() {
                return Err(Error::Dimension("family codebooks differ in dimension".into()));
            }
            if cb.distortion != spec {
                return Err(Error::Input(format!(
                    "family codebook for k = {} uses {} instead of usospa with c = {}",
                    k,
                    cb.distortion.name(),
                    cutoff
                )));
            }
            if map.insert(k, cb).is_some() {
                return Err(Error::Input(format!("two codebooks for cardinality {}", k)));
            }
        }
        if map.is_empty() {
            return Err(Error::Input("family needs at least one codebook".into()));
        }
        Ok(Self { cutoff, books: map })
    }

    pub fn books(&self) -> &BTreeMap<usize, Codebook> {
        &self.books
    }

    pub fn get(&self, k: usize) -> Option<&Codebook> {
        self.books.get(&k)
    }

    /// All codebooks as consecutive text blocks.
    pub fn to_text(&self) -> String {
        self.books.values().map(Codebook::to_text).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let books = Codebook::parse_blocks(text)?;
        let cutoff = books
            .first()
            .and_then(|b| b.distortion.cutoff())
            .ok_or_else(|| Error::Parse("family file must hold usospa codebooks".into()))?;
        Self::new(cutoff, books)
    }

    fn offset(&self, k: usize) -> usize {
        self.books.range(..k).map(|(_, b)| b.size()).sum()
    }
}

impl Encoder for CodebookFamily {
    fn encode(&self, x: &PointPattern) -> Result<(usize, f64)> {
        if let Some(cb) = self.books.get(&x.len()) {
            let (j, v) = nearest_codeword(x, cb)?;
            return Ok((self.offset(x.len()) + j, v));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut base = 0;
        for cb in self.books.values() {
            for (j, cw) in cb.codewords.iter().enumerate() {
                let v = usospa(x, cw, self.cutoff)?;
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((base + j, v));
                }
            }
            base += cb.size();
        }
        Ok(best.expect("family is nonempty"))
    }

    fn size(&self) -> usize {
        self.books.values().map(Codebook::size).sum()
    }
}

/// Stopping rule and iteration cap for LBG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbgConfig {
    pub max_iters: usize,
    /// Stop when the best distortion improved by less than this fraction
    /// over the last `window` iterations.
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for LbgConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-4,
            window: 3,
        }
    }
}

/// Diagnostics for one LBG iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbgIteration {
    /// Average training distortion after the nearest-codeword partition.
    pub partition_distortion: f64,
    /// Average distortion of every sample to the new center of its cell;
    /// `None` on the final partition-only pass.
    pub center_distortion: Option<f64>,
    pub empty_cells: usize,
    /// Best partition distortion so far.
    pub best: f64,
}

/// A trained codebook with its iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct LbgOutcome {
    pub codebook: Codebook,
    pub history: Vec<LbgIteration>,
}

/// Common cardinality of the samples, or an error.
fn common_cardinality(samples: &[PointPattern]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Input("training set is empty".into()))?;
    for (i, x) in samples.iter().enumerate() {
        if x.dim() != first.dim() {
            return Err(Error::Dimension(format!(
                "training sample {} lives in R^{}, expected R^{}",
                i,
                x.dim(),
                first.dim()
            )));
        }
        if x.len() != first.len() {
            return Err(Error::Input(format!(
                "training samples must share one cardinality (sample {} has {}, expected {}); \
                 use per-cardinality training for mixed sources",
                i,
                x.len(),
                first.len()
            )));
        }
    }
    Ok((first.len(), first.dim()))
}

fn draw_initial(samples: &[PointPattern], m: usize, rng: &mut SimRng) -> Result<Vec<PointPattern>> {
    for _ in 0..INIT_ATTEMPTS {
        let picked: Vec<PointPattern> = index::sample(rng, samples.len(), m)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect();
        let mut keys: Vec<Vec<u64>> = picked
            .iter()
            .map(|p| p.canonical().coords().iter().map(|v| v.to_bits()).collect())
            .collect();
        keys.sort();
        keys.dedup();
        if keys.len() == m {
            return Ok(picked);
        }
    }
    Err(Error::Input(format!(
        "could not draw {} distinct initial codewords in {} attempts",
        m, INIT_ATTEMPTS
    )))
}

/// Trains an `M`-codeword codebook with LBG; see [`lbg_train_traced`].
pub fn lbg_train(
    samples: &[PointPattern],
    m: usize,
    distortion: DistortionSpec,
    heuristic: Heuristic,
    config: &LbgConfig,
    seed: u64,
) -> Result<Codebook> {
    lbg_train_traced(samples, m, distortion, heuristic, config, seed).map(|o| o.codebook)
}

/// Trains with the randomness of stream `TRAINING` of `seed` and returns the
/// per-iteration history as well.
pub fn lbg_train_traced(
    samples: &[PointPattern],
    m: usize,
    distortion: DistortionSpec,
    heuristic: Heuristic,
    config: &LbgConfig,
    seed: u64,
) -> Result<LbgOutcome> {
    let mut rng = stream_rng(seed, streams::TRAINING);
    lbg_with_rng(samples, m, distortion, heuristic, config, seed, &mut rng)
}

fn lbg_with_rng(
    samples: &[PointPattern],
    m: usize,
    distortion: DistortionSpec,
    heuristic: Heuristic,
    config: &LbgConfig,
    seed: u64,
    rng: &mut SimRng,
) -> Result<LbgOutcome> {
    common_cardinality(samples)?;
    if m == 0 || m > samples.len() {
        return Err(Error::Input(format!(
            "need 1 <= M <= |samples|, got M = {} with {} samples",
            m,
            samples.len()
        )));
    }
    if config.window == 0 || !(config.rel_tol >= 0.0) {
        return Err(Error::Config("LBG window must be >= 1 and rel_tol >= 0".into()));
    }
    let cap = distortion.cutoff().map(|c| c * c);
    let n = samples.len() as f64;

    let mut codewords = draw_initial(samples, m, rng)?;
    let mut best: Option<(f64, Vec<PointPattern>)> = None;
    let mut history: Vec<LbgIteration> = Vec::new();
    let mut iterations = 0;

    loop {
        let assigned: Vec<(usize, f64)> = samples
            .par_iter()
            .map(|x| nearest_in(x, &codewords, &distortion))
            .collect::<Result<_>>()?;
        let partition_distortion = assigned.iter().map(|a| a.1).sum::<f64>() / n;
        if best.as_ref().is_none_or(|(b, _)| partition_distortion < *b) {
            best = Some((partition_distortion, codewords.clone()));
        }
        let best_val = best.as_ref().expect("set above").0;

        let converged = history.len() >= config.window && {
            let old = history[history.len() - config.window].best;
            old <= 0.0 || (old - best_val) / old < config.rel_tol
        };
        if iterations >= config.max_iters || converged || best_val == 0.0 {
            history.push(LbgIteration {
                partition_distortion,
                center_distortion: None,
                empty_cells: 0,
                best: best_val,
            });
            break;
        }

        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (i, (j, _)) in assigned.iter().enumerate() {
            cells[*j].push(i);
        }
        let mut empty_cells = 0;
        for (j, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                empty_cells += 1;
                codewords[j] = samples[rng.random_range(0..samples.len())].clone();
            }
        }
        let orders: Vec<Vec<usize>> = cells
            .iter()
            .map(|cell| {
                let mut order: Vec<usize> = (0..cell.len()).collect();
                if heuristic == Heuristic::ModifiedSingleHub {
                    order.shuffle(rng);
                }
                order
            })
            .collect();

        let updated: Vec<Option<(PointPattern, f64)>> = cells
            .par_iter()
            .zip(&orders)
            .map(|(cell, order)| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let members: Vec<&PointPattern> = cell.iter().map(|&i| &samples[i]).collect();
                let sol = match heuristic {
                    Heuristic::Exact => center_exact(&members)?,
                    Heuristic::SingleHub => center::center_single_hub_capped(&members, 0, cap)?,
                    Heuristic::MultiHub => center::center_multi_hub_capped(&members, cap)?,
                    Heuristic::ModifiedSingleHub => {
                        center::center_modified_single_hub_capped(&members, order, cap)?
                    }
                };
                let cost = average_cost(&members, &sol.center, cap)? * members.len() as f64;
                Ok(Some((sol.center, cost)))
            })
            .collect::<Result<_>>()?;
        let mut center_total = 0.0;
        for (j, u) in updated.into_iter().enumerate() {
            if let Some((c, cost)) = u {
                codewords[j] = c;
                center_total += cost;
            }
        }
        history.push(LbgIteration {
            partition_distortion,
            center_distortion: Some(center_total / n),
            empty_cells,
            best: best_val,
        });
        iterations += 1;
    }

    let (training_distortion, codewords) = best.expect("at least one partition");
    let meta = CodebookMeta {
        heuristic: heuristic.name().to_string(),
        training_samples: samples.len(),
        seed,
        iterations,
        training_distortion,
    };
    Ok(LbgOutcome {
        codebook: Codebook::new(codewords, distortion, meta)?,
        history,
    })
}

/// Trains one USOSPA codebook per cardinality present in `samples`.
///
/// `budget[k]` is the codebook size for cardinality `k`, capped at the
/// number of distinct samples of that cardinality. Cardinality 0 always gets
/// the single empty codeword. A budget of 0 leaves that cardinality to the
/// family's fallback search.
pub fn lbg_train_per_cardinality(
    samples: &[PointPattern],
    budget: &BTreeMap<usize, usize>,
    cutoff: f64,
    heuristic: Heuristic,
    config: &LbgConfig,
    seed: u64,
) -> Result<CodebookFamily> {
    let spec = DistortionSpec::usospa(cutoff)?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Input("training set is empty".into()))?;
    let dim = first.dim();
    let mut groups: BTreeMap<usize, Vec<PointPattern>> = BTreeMap::new();
    for x in samples {
        if x.dim() != dim {
            return Err(Error::Dimension("training samples differ in dimension".into()));
        }
        groups.entry(x.len()).or_default().push(x.clone());
    }
    let mut books = Vec::new();
    for (&k, group) in &groups {
        let m_k = *budget.get(&k).ok_or_else(|| {
            Error::Config(format!("codebook budget has no entry for cardinality {}", k))
        })?;
        if k == 0 {
            let meta = CodebookMeta {
                training_samples: group.len(),
                training_distortion: 0.0,
                ..CodebookMeta::untrained(heuristic.name(), seed)
            };
            books.push(Codebook::new(vec![PointPattern::empty(dim)?], spec, meta)?);
            continue;
        }
        if m_k == 0 {
            continue;
        }
        let mut distinct: Vec<Vec<u64>> = group
            .iter()
            .map(|p| p.canonical().coords().iter().map(|v| v.to_bits()).collect())
            .collect();
        distinct.sort();
        distinct.dedup();
        let m = m_k.min(distinct.len());
        let mut rng = stream_rng(seed, per_cardinality_stream(k));
        let out = lbg_with_rng(group, m, spec, heuristic, config, seed, &mut rng)?;
        books.push(out.codebook);
    }
    if books.is_empty() {
        return Err(Error::Config("every cardinality in the training set has budget 0".into()));
    }
    CodebookFamily::new(cutoff, books)
}

/// `n` patterns from stream `TRAINING_SET` of `seed`.
pub fn draw_training_set<S: PatternSource>(source: &S, n: usize, seed: u64) -> Vec<PointPattern> {
    let mut rng = stream_rng(seed, streams::TRAINING_SET);
    (0..n).map(|_| source.sample(&mut rng)).collect()
}

/// `M` codewords drawn directly from the source, from stream `BASELINE`.
pub fn random_codebook<S: PatternSource>(
    source: &S,
    m: usize,
    distortion: DistortionSpec,
    seed: u64,
) -> Result<Codebook> {
    let mut rng = stream_rng(seed, streams::BASELINE);
    let codewords = (0..m).map(|_| source.sample(&mut rng)).collect();
    Codebook::new(codewords, distortion, CodebookMeta::untrained("random", seed))
}

/// Family of raw source draws: for every budgeted cardinality, the first
/// `budget[k]` patterns of that cardinality among `pool` draws from stream
/// `BASELINE`.
pub fn random_family<S: PatternSource>(
    source: &S,
    budget: &BTreeMap<usize, usize>,
    cutoff: f64,
    pool: usize,
    seed: u64,
) -> Result<CodebookFamily> {
    let spec = DistortionSpec::usospa(cutoff)?;
    let mut rng = stream_rng(seed, streams::BASELINE);
    let mut groups: BTreeMap<usize, Vec<PointPattern>> = BTreeMap::new();
    for _ in 0..pool {
        let x = source.sample(&mut rng);
        let want = budget.get(&x.len()).copied().unwrap_or(0);
        let g = groups.entry(x.len()).or_default();
        if g.len() < want {
            g.push(x);
        }
    }
    let books = groups
        .into_values()
        .filter(|g| !g.is_empty())
        .map(|g| Codebook::new(g, spec, CodebookMeta::untrained("random", seed)))
        .collect::<Result<Vec<_>>>()?;
    CodebookFamily::new(cutoff, books)
}

/// Monte Carlo estimate of the expected distortion of `encoder` on fresh
/// draws from stream `EVALUATION` of `seed`.
pub fn estimate_distortion<E: Encoder + ?Sized, S: PatternSource>(
    encoder: &E,
    source: &S,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_samples < 100 {
        return Err(Error::Config(format!(
            "distortion estimate needs at least 100 samples, got {}",
            n_samples
        )));
    }
    monte_carlo(n_samples, seed, streams::EVALUATION, |rng| {
        Ok(encoder.encode(&source.sample(rng))?.1)
    })
}

/// The point `(D, log M)` achieved by a codebook of `size` codewords.
pub fn operational_point(size: usize, heuristic: &str, seed: u64, est: &Estimate) -> Result<RdPoint> {
    if size == 0 {
        return Err(Error::Input("codebook is empty".into()));
    }
    Ok(RdPoint::new(est.mean, (size as f64).ln(), "codebook")?
        .with_param("M", size)
        .with_param("heuristic", heuristic)
        .with_param("seed", seed)
        .with_param("stderr", est.stderr)
        .with_param("samples", est.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{GaussianFixedSource, PoissonUnitSquareSource};

    fn gaussian_set(n: usize, k: usize, seed: u64) -> Vec<PointPattern> {
        draw_training_set(&GaussianFixedSource::new(k, 2).unwrap(), n, seed)
    }

    #[test]
    fn heuristic_names_roundtrip() {
        for h in Heuristic::ALL {
            assert_eq!(h.name().parse::<Heuristic>().unwrap(), h);
        }
        assert!("hub".parse::<Heuristic>().is_err());
    }

    #[test]
    fn nearest_codeword_ties_and_exact_match() {
        let p = |v: f64| PointPattern::new(1, vec![v]).unwrap();
        let cws = vec![p(5.0), p(3.0), p(-1.0), p(7.0), p(3.0), p(1.0)];
        let cb = Codebook::new(cws, DistortionSpec::FixedCardinalitySquared, CodebookMeta::untrained("x", 0)).unwrap();
        assert_eq!(nearest_codeword(&p(3.0), &cb).unwrap(), (1, 0.0));
        // 0 is equidistant from -1 (index 2) and 1 (index 5)
        assert_eq!(nearest_codeword(&p(0.0), &cb).unwrap().0, 2);
        let empty = Codebook {
            codewords: vec![],
            distortion: DistortionSpec::FixedCardinalitySquared,
            meta: CodebookMeta::untrained("x", 0),
        };
        assert!(nearest_codeword(&p(0.0), &empty).is_err());
    }

    #[test]
    fn nearest_codeword_matches_shuffled_scan() {
        let set = gaussian_set(16 + 200, 3, 4);
        let cb = Codebook::new(set[..16].to_vec(), DistortionSpec::FixedCardinalitySquared, CodebookMeta::untrained("x", 0)).unwrap();
        let mut rng = stream_rng(4, 99);
        for x in &set[16..] {
            let (j, v) = nearest_codeword(x, &cb).unwrap();
            let mut order: Vec<usize> = (0..16).collect();
            order.shuffle(&mut rng);
            let (mut bj, mut bv) = (usize::MAX, f64::INFINITY);
            for &o in &order {
                let d = crate::distortion::rho2(x, &cb.codewords[o]).unwrap();
                if d < bv || (d == bv && o < bj) {
                    bj = o;
                    bv = d;
                }
            }
            assert_eq!((j, v), (bj, bv));
        }
    }

    #[test]
    fn lbg_m_equals_samples_is_lossless() {
        let set = gaussian_set(20, 3, 1);
        let cb = lbg_train(&set, 20, DistortionSpec::FixedCardinalitySquared, Heuristic::SingleHub, &LbgConfig::default(), 1).unwrap();
        assert_eq!(cb.meta.training_distortion, 0.0);
        for x in &set {
            assert_eq!(nearest_codeword(x, &cb).unwrap().1, 0.0);
        }
    }

    #[test]
    fn lbg_single_codeword() {
        let set = gaussian_set(50, 2, 2);
        let cb = lbg_train(&set, 1, DistortionSpec::FixedCardinalitySquared, Heuristic::MultiHub, &LbgConfig::default(), 2).unwrap();
        let refs: Vec<&PointPattern> = set.iter().collect();
        let avg = average_cost(&refs, &cb.codewords[0], None).unwrap();
        assert!((avg - cb.meta.training_distortion).abs() < 1e-12);
    }

    #[test]
    fn lbg_partition_step_never_increases() {
        let set = gaussian_set(800, 3, 3);
        for h in [Heuristic::SingleHub, Heuristic::MultiHub, Heuristic::ModifiedSingleHub] {
            let out = lbg_train_traced(&set, 8, DistortionSpec::FixedCardinalitySquared, h, &LbgConfig::default(), 3).unwrap();
            for w in out.history.windows(2) {
                if w[0].empty_cells == 0 {
                    let centered = w[0].center_distortion.unwrap();
                    assert!(w[1].partition_distortion <= centered + 1e-12, "{:?}", w);
                }
                assert!(w[1].best <= w[0].best);
            }
            let last = out.history.last().unwrap();
            assert_eq!(out.codebook.meta.training_distortion, last.best);
        }
    }

    #[test]
    fn lbg_is_reproducible() {
        let set = gaussian_set(400, 3, 5);
        let train = || lbg_train(&set, 10, DistortionSpec::FixedCardinalitySquared, Heuristic::ModifiedSingleHub, &LbgConfig::default(), 5).unwrap();
        assert_eq!(train().to_text(), train().to_text());
    }

    #[test]
    fn lbg_errors() {
        let set = gaussian_set(5, 3, 6);
        let spec = DistortionSpec::FixedCardinalitySquared;
        assert!(lbg_train(&set, 6, spec, Heuristic::SingleHub, &LbgConfig::default(), 0).is_err());
        let dup = vec![set[0].clone(); 4];
        assert!(lbg_train(&dup, 2, spec, Heuristic::SingleHub, &LbgConfig::default(), 0).is_err());
        let mut mixed = set.clone();
        mixed.push(gaussian_set(1, 2, 7).remove(0));
        assert!(lbg_train(&mixed, 2, spec, Heuristic::SingleHub, &LbgConfig::default(), 0).is_err());
    }

    #[test]
    fn trained_beats_random_on_fresh_samples() {
        let src = GaussianFixedSource::new(2, 2).unwrap();
        let set = draw_training_set(&src, 1600, 11);
        let spec = DistortionSpec::FixedCardinalitySquared;
        let trained = lbg_train(&set, 16, spec, Heuristic::ModifiedSingleHub, &LbgConfig::default(), 11).unwrap();
        let random = random_codebook(&src, 16, spec, 11).unwrap();
        let a = estimate_distortion(&trained, &src, 5000, 11).unwrap();
        let b = estimate_distortion(&random, &src, 5000, 11).unwrap();
        assert!(a.mean < 0.9 * b.mean, "trained {} random {}", a.mean, b.mean);
    }

    #[test]
    fn per_cardinality_family() {
        let src = PoissonUnitSquareSource::new(10.0).unwrap();
        let set = draw_training_set(&src, 3000, 12);
        let budget: BTreeMap<usize, usize> = (0..=25).map(|k| (k, if k == 0 { 1 } else { 8 })).collect();
        let fam = lbg_train_per_cardinality(&set, &budget, 0.1, Heuristic::ModifiedSingleHub, &LbgConfig::default(), 12).unwrap();
        assert!(fam.books().values().all(|b| b.size() <= 8));
        assert!(fam.size() <= 1 + 25 * 8);
        // every drawn pattern encodes, including cardinalities with no codebook
        let est = estimate_distortion(&fam, &src, 2000, 12).unwrap();
        assert!(est.mean.is_finite());
        let random = random_family(&src, &budget, 0.1, 3000, 12).unwrap();
        let base = estimate_distortion(&random, &src, 2000, 12).unwrap();
        assert!(est.mean < base.mean, "trained {} random {}", est.mean, base.mean);
        let back = CodebookFamily::parse(&fam.to_text()).unwrap();
        assert_eq!(back.size(), fam.size());

        let partial: BTreeMap<usize, usize> = (1..=5).map(|k| (k, 4)).collect();
        assert!(matches!(
            lbg_train_per_cardinality(&set, &partial, 0.1, Heuristic::SingleHub, &LbgConfig::default(), 12),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn per_cardinality_single_group_matches_plain_training() {
        let set = gaussian_set(300, 3, 13);
        let budget = BTreeMap::from([(3usize, 6usize)]);
        let cfg = LbgConfig::default();
        let fam = lbg_train_per_cardinality(&set, &budget, 0.5, Heuristic::SingleHub, &cfg, 13).unwrap();
        let mut rng = stream_rng(13, per_cardinality_stream(3));
        let plain = lbg_with_rng(&set, 6, DistortionSpec::usospa(0.5).unwrap(), Heuristic::SingleHub, &cfg, 13, &mut rng).unwrap();
        assert_eq!(fam.get(3).unwrap().codewords, plain.codebook.codewords);
    }

    #[test]
    fn degenerate_source_has_zero_distortion() {
        struct Fixed(PointPattern);
        impl PatternSource for Fixed {
            fn dim(&self) -> usize {
                2
            }
            fn sample<R: Rng + ?Sized>(&self, _: &mut R) -> PointPattern {
                self.0.clone()
            }
        }
        let p = PointPattern::new(2, vec![0.3, 0.4, 1.0, 2.0]).unwrap();
        let cb = Codebook::new(vec![p.clone()], DistortionSpec::FixedCardinalitySquared, CodebookMeta::untrained("x", 0)).unwrap();
        let est = estimate_distortion(&cb, &Fixed(p), 500, 1).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let src = GaussianFixedSource::new(2, 2).unwrap();
        let cb = random_codebook(&src, 8, DistortionSpec::FixedCardinalitySquared, 1).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let a = estimate_distortion(&cb, &src, 4000, seed).unwrap();
            let b = estimate_distortion(&cb, &src, 8000, seed + 100).unwrap();
            ratios.push(b.stderr / a.stderr);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean * 2f64.sqrt() - 1.0).abs() < 0.2, "{:?}", ratios);
    }

    #[test]
    fn quantizer_grid_codebook_at_fixed_k() {
        use crate::sampling::sample_quantized_pair;
        // k = 3 points, N = 10, c = 0.1: E[usospa] = k / (6 N^2)
        let (k, n) = (3usize, 10usize);
        let est = monte_carlo(100_000, 3, streams::EVALUATION, |rng| {
            let (x, y) = sample_quantized_pair(n, k, rng)?;
            usospa(&x, &y, 0.1)
        })
        .unwrap();
        let expected = k as f64 / (6.0 * (n * n) as f64);
        assert!((est.mean - expected).abs() < 3.0 * est.stderr, "{:?} vs {}", est, expected);
    }

    #[test]
    fn operational_rates() {
        let est = Estimate { mean: 0.5, stderr: 0.01, n: 100 };
        assert_eq!(operational_point(1, "x", 0, &est).unwrap().rate, 0.0);
        assert!((operational_point(64, "x", 0, &est).unwrap().rate - 4.1589).abs() < 1e-4);
        assert!((operational_point(2048, "x", 0, &est).unwrap().rate - 7.6246).abs() < 1e-4);
    }
}
