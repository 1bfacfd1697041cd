//! The commands as library functions returning CSV text.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::bounds::poisson::{concave_k_max, default_n_max, min_grid};
use crate::bounds::{
    gaussian_pp_lower, gaussian_pp_upper_terms, gaussian_vector_rd, poisson_lower_unit_square,
    poisson_upper_unit_square, PoissonBoundParams,
};
use crate::codebook::{
    draw_training_set, estimate_distortion, lbg_train, lbg_train_per_cardinality, random_codebook,
    random_family, CodebookFamily, Encoder, Heuristic, LbgConfig,
};
use crate::error::{Error, Result};
use crate::patterns::{Codebook, DistortionSpec};
use crate::sampling::{estimate_quantized_pair_distortion, GaussianFixedSource, PoissonUnitSquareSource};

/// CSV text with a `#` header recording the tool version and configuration.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, config: &[(&str, String)], columns: &[&str], notes: &str) -> Self {
        let mut text = format!("# pprd {} command={}", env!("CARGO_PKG_VERSION"), command);
        for (k, v) in config {
            let _ = write!(text, " {}={}", k, v);
        }
        text.push('\n');
        if !notes.is_empty() {
            let _ = writeln!(text, "# {}", notes);
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn rate_unit(bits: bool) -> (&'static str, f64) {
    if bits {
        ("bits", LN_2)
    } else {
        ("nats", 1.0)
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (points - 1) as f64)
                }
            })
            .collect(),
    }
}

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// How the Gaussian upper bound picks `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// `epsilon = (D / (kd))^p`.
    Power(f64),
    Fixed(f64),
}

impl EpsilonRule {
    fn epsilon(&self, k: u64, d: u64, distortion: f64) -> f64 {
        match *self {
            EpsilonRule::Power(p) => (distortion / (k * d) as f64).powf(p),
            EpsilonRule::Fixed(e) => e,
        }
    }

    fn label(&self) -> String {
        match self {
            EpsilonRule::Power(p) => format!("power:{}", p),
            EpsilonRule::Fixed(e) => format!("fixed:{}", e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSettings {
    pub k: u64,
    pub d: u64,
    pub dmin: f64,
    pub dmax: f64,
    pub points: usize,
    pub epsilon: EpsilonRule,
    pub bits: bool,
}

impl GaussianSettings {
    pub fn new(k: u64, d: u64) -> Self {
        Self {
            k,
            d,
            dmin: 1e-6,
            dmax: (k * d) as f64,
            points: 50,
            epsilon: EpsilonRule::Power(0.375),
            bits: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::Config(format!("need k >= 1 and d >= 1, got k={} d={}", self.k, self.d)));
        }
        let kd = (self.k * self.d) as f64;
        for (name, v) in [("dmin", self.dmin), ("dmax", self.dmax)] {
            if !(v > 0.0 && v <= kd) {
                return Err(Error::Config(format!("{} = {} must lie in (0, kd = {}]", name, v, kd)));
            }
        }
        if self.dmin > self.dmax || (self.points > 1 && self.dmin == self.dmax) {
            return Err(Error::Config(format!("dmin = {} must be below dmax = {}", self.dmin, self.dmax)));
        }
        if self.points == 0 {
            return Err(Error::Config("points must be at least 1".into()));
        }
        match self.epsilon {
            EpsilonRule::Power(p) if !(p > 0.0 && p.is_finite()) => {
                Err(Error::Config(format!("epsilon power must be positive, got {}", p)))
            }
            EpsilonRule::Fixed(e) if !(e > 0.0 && e.is_finite()) => {
                Err(Error::Config(format!("epsilon must be positive, got {}", e)))
            }
            _ => Ok(()),
        }
    }
}

/// Gaussian fixed-cardinality bounds on a log-spaced distortion grid.
///
/// `upper` is the raw bound and is `NaN` at `D = kd`. `upper_envelope` is the
/// running minimum of `upper` and `R_vec` over the grid, which is also an
/// upper bound since the RD function is non-increasing and never exceeds the
/// vector RD function.
pub fn bounds_gaussian(s: &GaussianSettings) -> Result<String> {
    s.validate()?;
    let (unit, scale) = rate_unit(s.bits);
    let config = [
        ("k", s.k.to_string()),
        ("d", s.d.to_string()),
        ("dmin", s.dmin.to_string()),
        ("dmax", s.dmax.to_string()),
        ("points", s.points.to_string()),
        ("epsilon", s.epsilon.label()),
        ("units", unit.to_string()),
    ];
    let mut csv = Csv::new(
        "bounds-gaussian",
        &config,
        &[
            "k", "d", "epsilon_rule", "units", "D", "epsilon", "R_vec", "lower", "lower_clamped", "upper",
            "upper_envelope", "gap",
        ],
        "R_vec: Gaussian vector RD; lower/upper: pattern RD bounds; gap = upper - lower",
    );
    let kd = (s.k * s.d) as f64;
    let mut envelope = f64::INFINITY;
    for dist in log_grid(s.dmin, s.dmax, s.points) {
        let eps = s.epsilon.epsilon(s.k, s.d, dist);
        let r_vec = gaussian_vector_rd(s.k, s.d, dist)?;
        let lower = gaussian_pp_lower(s.k, s.d, dist)?;
        let upper = if dist < kd {
            gaussian_pp_upper_terms(s.k, s.d, dist, eps)?.total()
        } else {
            f64::NAN
        };
        envelope = envelope.min(r_vec);
        if upper.is_finite() {
            envelope = envelope.min(upper);
        }
        csv.row([
            s.k.to_string(),
            s.d.to_string(),
            s.epsilon.label(),
            unit.to_string(),
            dist.to_string(),
            eps.to_string(),
            (r_vec / scale).to_string(),
            (lower / scale).to_string(),
            (lower.max(0.0) / scale).to_string(),
            (upper / scale).to_string(),
            (envelope / scale).to_string(),
            ((upper - lower) / scale).to_string(),
        ]);
    }
    Ok(csv.finish())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSettings {
    pub lambda: f64,
    pub cutoff: f64,
    pub kmax: usize,
    pub n_list: Vec<usize>,
    /// Cap on `N_max`; each row uses `min(N, nmax)`.
    pub nmax: usize,
    pub dmin: Option<f64>,
    pub dmax: Option<f64>,
    /// Lower-bound grid points; 0 emits upper rows only.
    pub points: usize,
    pub tol: f64,
    /// Monte Carlo draws per upper row checking the grid construction's
    /// distortion; 0 disables the check.
    pub check_samples: usize,
    pub seed: u64,
    pub bits: bool,
}

impl PoissonSettings {
    pub fn new(lambda: f64, cutoff: f64) -> Self {
        let n0 = if cutoff > 0.0 { min_grid(cutoff) } else { 1 };
        Self {
            lambda,
            cutoff,
            kmax: if cutoff > 0.0 { concave_k_max(cutoff) } else { 0 },
            n_list: (n0..=n0.max(207)).collect(),
            nmax: 10,
            dmin: None,
            dmax: None,
            points: 50,
            tol: 1e-9,
            check_samples: 0,
            seed: 1,
            bits: false,
        }
    }

    fn params(&self) -> Result<PoissonBoundParams> {
        let mut p = PoissonBoundParams::new(self.lambda, self.cutoff)?;
        p.k_max = self.kmax;
        p.tol = self.tol;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.kmax == 0 {
            return Err(Error::Config("kmax must be at least 1".into()));
        }
        if self.nmax == 0 {
            return Err(Error::Config("nmax must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        let n0 = min_grid(self.cutoff);
        let bad: Vec<String> = self
            .n_list
            .iter()
            .filter(|&&n| n < n0)
            .map(|n| format!("N={} < {}", n, n0))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Config(format!(
                "grid construction needs N >= ceil(1/(sqrt(2) c)) = {}: {}",
                n0,
                bad.join("; ")
            )));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("N list is empty".into()));
        }
        for v in [self.dmin, self.dmax].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("distortion grid bound {} must be positive", v)));
            }
        }
        if self.check_samples == 1 {
            return Err(Error::Config("check-samples must be 0 or at least 2".into()));
        }
        Ok(())
    }
}

/// Poisson bounds: lower-bound rows on a distortion grid, then one upper
/// row per grid resolution `N` with the lower bound evaluated at the same
/// distortion.
pub fn bounds_poisson(s: &PoissonSettings) -> Result<String> {
    s.validate()?;
    let (unit, scale) = rate_unit(s.bits);
    let base = s.params()?;
    let uppers: Vec<PoissonBoundParams> = s
        .n_list
        .iter()
        .map(|&n| {
            let mut p = base.clone().with_grid(n);
            p.n_max = default_n_max(n).min(s.nmax);
            p
        })
        .collect();
    let upper_ds: Vec<f64> = uppers.iter().map(|p| p.upper_distortion()).collect();
    let dmin = s.dmin.unwrap_or_else(|| upper_ds.iter().copied().fold(f64::INFINITY, f64::min));
    let dmax = s.dmax.unwrap_or_else(|| upper_ds.iter().copied().fold(0.0, f64::max));
    if s.points > 1 && !(dmin < dmax) {
        return Err(Error::Config(format!("dmin = {} must be below dmax = {}", dmin, dmax)));
    }

    let config = [
        ("lambda", s.lambda.to_string()),
        ("cutoff", s.cutoff.to_string()),
        ("kmax", s.kmax.to_string()),
        ("N", format!("{}..{}({})", s.n_list[0], s.n_list[s.n_list.len() - 1], s.n_list.len())),
        ("nmax", s.nmax.to_string()),
        ("dmin", dmin.to_string()),
        ("dmax", dmax.to_string()),
        ("points", s.points.to_string()),
        ("tol", s.tol.to_string()),
        ("check_samples", s.check_samples.to_string()),
        ("seed", s.seed.to_string()),
        ("units", unit.to_string()),
    ];
    let mut csv = Csv::new(
        "bounds-poisson",
        &config,
        &[
            "kind", "lambda", "cutoff", "kmax", "units", "N", "Nmax", "D", "rate", "rate_clamped", "s_opt",
            "nonconcave", "lower_at_D", "upper_ge_lower", "mc_D", "mc_stderr",
        ],
        "kind=lower: maximized lower bound; kind=upper: grid construction at D = lambda/(6 N^2); \
         mc_D: Monte Carlo distortion of that construction",
    );
    let echo = |kind: &str| {
        vec![
            kind.to_string(),
            s.lambda.to_string(),
            s.cutoff.to_string(),
            s.kmax.to_string(),
            unit.to_string(),
        ]
    };
    for dist in log_grid(dmin, dmax, s.points) {
        let lo = poisson_lower_unit_square(&base, dist)?;
        let mut row = echo("lower");
        row.extend([
            String::new(),
            String::new(),
            dist.to_string(),
            (lo.value / scale).to_string(),
            (lo.value.max(0.0) / scale).to_string(),
            lo.s_opt.to_string(),
            lo.nonconcave.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
        csv.row(row);
    }
    for p in &uppers {
        let up = poisson_upper_unit_square(p)?;
        let lo = poisson_lower_unit_square(&base, up.distortion)?;
        let mc = if s.check_samples > 0 {
            Some(estimate_quantized_pair_distortion(
                s.lambda,
                p.n_grid,
                s.cutoff,
                s.check_samples,
                s.seed,
            )?)
        } else {
            None
        };
        let mut row = echo("upper");
        row.extend([
            p.n_grid.to_string(),
            p.n_max.to_string(),
            up.distortion.to_string(),
            (up.rate / scale).to_string(),
            (up.rate / scale).to_string(),
            String::new(),
            lo.nonconcave.to_string(),
            (lo.value / scale).to_string(),
            (up.rate >= lo.value).to_string(),
            opt_cell(mc.map(|e| e.mean)),
            opt_cell(mc.map(|e| e.stderr)),
        ]);
        csv.row(row);
    }
    Ok(csv.finish())
}

/// Pattern source for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Gaussian { k: usize, d: usize },
    /// Poisson on the unit square, coded per cardinality up to `max_card`.
    Poisson { lambda: f64, cutoff: f64, max_card: usize },
}

impl SourceSpec {
    fn echo(&self) -> [String; 6] {
        match *self {
            SourceSpec::Gaussian { k, d } => [
                "gaussian".into(),
                k.to_string(),
                d.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ],
            SourceSpec::Poisson {
                lambda,
                cutoff,
                max_card,
            } => [
                "poisson".into(),
                String::new(),
                "2".into(),
                lambda.to_string(),
                cutoff.to_string(),
                max_card.to_string(),
            ],
        }
    }

    fn config(&self) -> Vec<(&'static str, String)> {
        let e = self.echo();
        let keys = ["source", "k", "d", "lambda", "cutoff", "max_card"];
        keys.into_iter()
            .zip(e)
            .filter(|(_, v)| !v.is_empty())
            .collect()
    }

    /// Budget `M` for every cardinality `1..=max_card`, one codeword for 0.
    fn budget(max_card: usize, m: usize) -> BTreeMap<usize, usize> {
        (0..=max_card).map(|k| (k, if k == 0 { 1 } else { m })).collect()
    }
}

const CODEBOOK_COLUMNS: [&str; 18] = [
    "source", "k", "d", "lambda", "cutoff", "max_card", "M", "heuristic", "seed", "train_samples", "samples",
    "iterations", "training_distortion", "units", "D", "stderr", "rate", "codewords",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub source: SourceSpec,
    pub m: usize,
    pub heuristic: Heuristic,
    pub seed: u64,
    pub train_samples: usize,
    pub samples: usize,
    pub lbg: LbgConfig,
    /// Also evaluate a codebook of raw source draws under the same seed.
    pub baseline: bool,
    pub codebook_out: Option<PathBuf>,
    pub bits: bool,
}

impl TrainSettings {
    /// Defaults: 100 M training samples, 10^5 evaluation samples.
    pub fn new(source: SourceSpec, m: usize) -> Self {
        Self {
            source,
            m,
            heuristic: Heuristic::ModifiedSingleHub,
            seed: 1,
            train_samples: 100 * m,
            samples: 100_000,
            lbg: LbgConfig::default(),
            baseline: false,
            codebook_out: None,
            bits: false,
        }
    }
}

/// Trained codebook text and the CSV report.
pub struct TrainOutput {
    pub codebook: String,
    pub csv: String,
}

/// Trains a codebook, evaluates it on fresh samples and reports `(D, log M)`.
pub fn train(s: &TrainSettings) -> Result<TrainOutput> {
    if s.m == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    if s.train_samples < s.m {
        return Err(Error::Config(format!(
            "need at least M = {} training samples, got {}",
            s.m, s.train_samples
        )));
    }
    let (unit, scale) = rate_unit(s.bits);
    let mut config = s.source.config();
    config.extend([
        ("M", s.m.to_string()),
        ("heuristic", s.heuristic.to_string()),
        ("seed", s.seed.to_string()),
        ("train_samples", s.train_samples.to_string()),
        ("samples", s.samples.to_string()),
        ("max_iters", s.lbg.max_iters.to_string()),
        ("tol", s.lbg.rel_tol.to_string()),
        ("baseline", s.baseline.to_string()),
        ("units", unit.to_string()),
    ]);
    let mut csv = Csv::new(
        "train",
        &config,
        &CODEBOOK_COLUMNS,
        "D: Monte Carlo distortion on fresh samples; rate = log(codewords)",
    );
    let mut emit = |heuristic: &str, iterations: String, training: String, enc: &dyn Encoder, est: crate::sampling::Estimate| {
        let mut row: Vec<String> = s.source.echo().to_vec();
        row.extend([
            s.m.to_string(),
            heuristic.to_string(),
            s.seed.to_string(),
            s.train_samples.to_string(),
            s.samples.to_string(),
            iterations,
            training,
            unit.to_string(),
            est.mean.to_string(),
            est.stderr.to_string(),
            (enc.rate() / scale).to_string(),
            enc.size().to_string(),
        ]);
        csv.row(row);
    };

    let codebook_text = match s.source {
        SourceSpec::Gaussian { k, d } => {
            let src = GaussianFixedSource::new(k, d)?;
            let set = draw_training_set(&src, s.train_samples, s.seed);
            let spec = DistortionSpec::FixedCardinalitySquared;
            let cb = lbg_train(&set, s.m, spec, s.heuristic, &s.lbg, s.seed)?;
            let est = estimate_distortion(&cb, &src, s.samples, s.seed)?;
            emit(
                s.heuristic.name(),
                cb.meta.iterations.to_string(),
                cb.meta.training_distortion.to_string(),
                &cb,
                est,
            );
            if s.baseline {
                let rnd = random_codebook(&src, s.m, spec, s.seed)?;
                let est = estimate_distortion(&rnd, &src, s.samples, s.seed)?;
                emit("random", String::new(), String::new(), &rnd, est);
            }
            cb.to_text()
        }
        SourceSpec::Poisson {
            lambda,
            cutoff,
            max_card,
        } => {
            let src = PoissonUnitSquareSource::new(lambda)?;
            let set = draw_training_set(&src, s.train_samples, s.seed);
            let budget = SourceSpec::budget(max_card, s.m);
            // cardinalities beyond max_card are left to the fallback search
            let mut full = budget.clone();
            for x in &set {
                full.entry(x.len()).or_insert(0);
            }
            let fam = lbg_train_per_cardinality(&set, &full, cutoff, s.heuristic, &s.lbg, s.seed)?;
            let est = estimate_distortion(&fam, &src, s.samples, s.seed)?;
            let iters: usize = fam.books().values().map(|b| b.meta.iterations).sum();
            emit(s.heuristic.name(), iters.to_string(), String::new(), &fam, est);
            if s.baseline {
                let rnd = random_family(&src, &budget, cutoff, s.train_samples, s.seed)?;
                let est = estimate_distortion(&rnd, &src, s.samples, s.seed)?;
                emit("random", String::new(), String::new(), &rnd, est);
            }
            fam.to_text()
        }
    };
    Ok(TrainOutput {
        codebook: codebook_text,
        csv: csv.finish(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub source: SourceSpec,
    pub codebook: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub bits: bool,
}

/// Evaluates a stored codebook (or family, for the Poisson source).
pub fn eval(s: &EvalSettings) -> Result<String> {
    let text = std::fs::read_to_string(&s.codebook)?;
    let (unit, scale) = rate_unit(s.bits);
    let mut config = s.source.config();
    config.extend([
        ("codebook", s.codebook.display().to_string()),
        ("seed", s.seed.to_string()),
        ("samples", s.samples.to_string()),
        ("units", unit.to_string()),
    ]);
    let (enc, heuristic, cb_seed, m): (Box<dyn Encoder>, String, String, usize) = match s.source {
        SourceSpec::Gaussian { k, d } => {
            let mut books = Codebook::parse_blocks(&text)?;
            if books.len() != 1 {
                return Err(Error::Parse(format!("expected one codebook, found {}", books.len())));
            }
            let cb = books.remove(0);
            if cb.dim() != d || cb.codewords.iter().any(|c| c.len() != k) {
                return Err(Error::Config(format!(
                    "codebook does not hold {}-point patterns in R^{}",
                    k, d
                )));
            }
            let (h, sd, m) = (cb.meta.heuristic.clone(), cb.meta.seed.to_string(), cb.size());
            (Box::new(cb), h, sd, m)
        }
        SourceSpec::Poisson { cutoff, .. } => {
            let fam = CodebookFamily::parse(&text)?;
            if fam.cutoff != cutoff {
                return Err(Error::Config(format!(
                    "codebook cut-off {} differs from requested {}",
                    fam.cutoff, cutoff
                )));
            }
            let first = fam.books().values().next().expect("nonempty family");
            let m = fam.books().values().map(|b| b.size()).max().unwrap_or(0);
            let (h, sd) = (first.meta.heuristic.clone(), first.meta.seed.to_string());
            (Box::new(fam), h, sd, m)
        }
    };
    let est = match s.source {
        SourceSpec::Gaussian { k, d } => {
            estimate_distortion(enc.as_ref(), &GaussianFixedSource::new(k, d)?, s.samples, s.seed)?
        }
        SourceSpec::Poisson { lambda, .. } => {
            estimate_distortion(enc.as_ref(), &PoissonUnitSquareSource::new(lambda)?, s.samples, s.seed)?
        }
    };
    let mut csv = Csv::new("eval", &config, &CODEBOOK_COLUMNS, "seed column: codebook training seed");
    let mut row: Vec<String> = s.source.echo().to_vec();
    row.extend([
        m.to_string(),
        heuristic,
        cb_seed,
        String::new(),
        s.samples.to_string(),
        String::new(),
        String::new(),
        unit.to_string(),
        est.mean.to_string(),
        est.stderr.to_string(),
        (enc.rate() / scale).to_string(),
        enc.size().to_string(),
    ]);
    csv.row(row);
    Ok(csv.finish())
}
