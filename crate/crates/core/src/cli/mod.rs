//! Command-line front end.
//!
//! Every parameter can come from a flag or from a `key = value` config file
//! given with `--config`; flags win. Commands produce CSV with a `#` header
//! line recording the tool version and the resolved configuration.

pub mod commands;
pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::codebook::{Heuristic, LbgConfig};
use crate::error::{Error, Result};

use commands::{
    EpsilonRule, EvalSettings, GaussianSettings, PoissonSettings, SourceSpec, TrainSettings,
};
use config::{parse_usize_list, ConfigFile};
use verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "pprd", version, about = "Rate-distortion bounds and codebooks for point patterns")]
pub struct Cli {
    /// Plain-text `key = value` file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path: the CSV or report, or for `train` the codebook file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report rates in bits instead of nats.
    #[arg(long, global = true)]
    pub bits: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds for k i.i.d. Gaussian points under the squared assignment error.
    BoundsGaussian(GaussianArgs),
    /// Bounds for a Poisson pattern on the unit square under USOSPA.
    BoundsPoisson(PoissonArgs),
    /// Train a codebook with LBG and evaluate it on fresh samples.
    Train(TrainArgs),
    /// Evaluate a stored codebook on fresh samples.
    Eval(EvalArgs),
    /// Run the built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long)]
    pub k: Option<u64>,
    #[arg(long)]
    pub d: Option<u64>,
    #[arg(long)]
    pub dmin: Option<f64>,
    /// Defaults to kd.
    #[arg(long)]
    pub dmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Exponent p of the rule epsilon = (D/(kd))^p.
    #[arg(long)]
    pub eps_power: Option<f64>,
    /// Fixed epsilon; overrides the power rule.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PoissonArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Grid sizes, e.g. `8..207` or `8,16,32`.
    #[arg(long)]
    pub n_grid: Option<String>,
    /// Cap on the truncation N_max of the upper bound's sum.
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub dmin: Option<f64>,
    #[arg(long)]
    pub dmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Golden-section tolerance on the slope.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte Carlo draws per upper row checking its distortion.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// `gaussian` or `poisson`.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Largest cardinality with its own codebook (Poisson source).
    #[arg(long)]
    pub max_card: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Codebook size (per cardinality for the Poisson source).
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training set size; defaults to 100 M.
    #[arg(long)]
    pub train_samples: Option<usize>,
    /// Evaluation samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Relative-improvement stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Also evaluate a codebook of raw source draws.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// distortion, bounds, codebook, sampling or all.
    #[arg(default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn resolve_source(a: &SourceArgs, cfg: &ConfigFile) -> Result<SourceSpec> {
    let kind = cfg.get(a.source.clone(), "source", "gaussian".to_string())?;
    let k = cfg.opt(a.k, "k")?;
    let d = cfg.opt(a.d, "d")?;
    let lambda = cfg.opt(a.lambda, "lambda")?;
    let cutoff = cfg.opt(a.cutoff, "cutoff")?;
    let max_card = cfg.opt(a.max_card, "max-card")?;
    match kind.as_str() {
        "gaussian" => {
            if lambda.is_some() || cutoff.is_some() || max_card.is_some() {
                return Err(Error::Config(
                    "lambda, cutoff and max-card apply to the poisson source only".into(),
                ));
            }
            Ok(SourceSpec::Gaussian {
                k: k.unwrap_or(4),
                d: d.unwrap_or(2),
            })
        }
        "poisson" => {
            if k.is_some() || d.is_some_and(|d| d != 2) {
                return Err(Error::Config(
                    "the poisson source lives on the unit square; k and d do not apply".into(),
                ));
            }
            Ok(SourceSpec::Poisson {
                lambda: lambda.unwrap_or(10.0),
                cutoff: cutoff.unwrap_or(0.1),
                max_card: max_card.unwrap_or(25),
            })
        }
        other => Err(Error::Config(format!(
            "unknown source '{}'; expected gaussian or poisson",
            other
        ))),
    }
}

/// Result of one command.
pub struct Outcome {
    pub text: String,
    /// False when a verification suite failed.
    pub ok: bool,
    /// Where to write `text`; `None` means stdout.
    pub out: Option<PathBuf>,
}

/// Runs a parsed command line. `train` writes its codebook to `--out`; every
/// other command returns its output for the caller to place.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let bits = cfg.switch(cli.bits, "bits")?;
    let out_path = cfg.opt(cli.out.clone(), "out")?;
    let outcome = match &cli.command {
        Command::BoundsGaussian(a) => {
            let k = cfg.get(a.k, "k", 4)?;
            let d = cfg.get(a.d, "d", 2)?;
            let mut s = GaussianSettings::new(k, d);
            s.dmin = cfg.get(a.dmin, "dmin", s.dmin)?;
            s.dmax = cfg.get(a.dmax, "dmax", s.dmax)?;
            s.points = cfg.get(a.points, "points", s.points)?;
            let power = cfg.get(a.eps_power, "eps-power", 0.375)?;
            s.epsilon = match cfg.opt(a.epsilon, "epsilon")? {
                Some(e) => EpsilonRule::Fixed(e),
                None => EpsilonRule::Power(power),
            };
            s.bits = bits;
            cfg.finish()?;
            commands::bounds_gaussian(&s)?
        }
        Command::BoundsPoisson(a) => {
            let lambda = cfg.get(a.lambda, "lambda", 10.0)?;
            let cutoff = cfg.get(a.cutoff, "cutoff", 0.1)?;
            if !(cutoff > 0.0 && cutoff.is_finite()) {
                return Err(Error::Config(format!("cut-off must be positive, got {}", cutoff)));
            }
            let mut s = PoissonSettings::new(lambda, cutoff);
            s.kmax = cfg.get(a.kmax, "kmax", s.kmax)?;
            if let Some(list) = cfg.opt(a.n_grid.clone(), "n-grid")? {
                s.n_list = parse_usize_list(&list)?;
            }
            s.nmax = cfg.get(a.nmax, "nmax", s.nmax)?;
            s.dmin = cfg.opt(a.dmin, "dmin")?;
            s.dmax = cfg.opt(a.dmax, "dmax")?;
            s.points = cfg.get(a.points, "points", s.points)?;
            s.tol = cfg.get(a.tol, "tol", s.tol)?;
            s.check_samples = cfg.get(a.samples, "samples", 0)?;
            s.seed = cfg.get(a.seed, "seed", s.seed)?;
            s.bits = bits;
            cfg.finish()?;
            commands::bounds_poisson(&s)?
        }
        Command::Train(a) => {
            let source = resolve_source(&a.source, &cfg)?;
            let m = cfg.get(a.m, "M", 64)?;
            let mut s = TrainSettings::new(source, m);
            s.heuristic = cfg
                .get(a.heuristic.clone(), "heuristic", s.heuristic.to_string())?
                .parse::<Heuristic>()?;
            s.seed = cfg.get(a.seed, "seed", s.seed)?;
            s.train_samples = cfg.get(a.train_samples, "train-samples", s.train_samples)?;
            s.samples = cfg.get(a.samples, "samples", s.samples)?;
            s.lbg = LbgConfig {
                max_iters: cfg.get(a.max_iters, "max-iters", s.lbg.max_iters)?,
                rel_tol: cfg.get(a.tol, "tol", s.lbg.rel_tol)?,
                ..s.lbg
            };
            s.baseline = cfg.switch(a.baseline, "baseline")?;
            s.codebook_out = out_path;
            s.bits = bits;
            cfg.finish()?;
            let out = commands::train(&s)?;
            if let Some(path) = &s.codebook_out {
                std::fs::write(path, &out.codebook)?;
            }
            return Ok(Outcome {
                text: out.csv,
                ok: true,
                out: None,
            });
        }
        Command::Eval(a) => {
            let source = resolve_source(&a.source, &cfg)?;
            let codebook = cfg
                .opt(a.codebook.clone(), "codebook")?
                .ok_or_else(|| Error::Config("eval needs --codebook <file>".into()))?;
            let s = EvalSettings {
                source,
                codebook,
                seed: cfg.get(a.seed, "seed", 1)?,
                samples: cfg.get(a.samples, "samples", 100_000)?,
                bits,
            };
            cfg.finish()?;
            commands::eval(&s)?
        }
        Command::Verify(a) => {
            let suite: Suite = a.suite.parse()?;
            let seed = cfg.get(a.seed, "seed", 1)?;
            cfg.finish()?;
            let report = verify::run_suite(suite, seed);
            return Ok(Outcome {
                text: report.render(),
                ok: report.passed(),
                out: out_path,
            });
        }
    };
    Ok(Outcome {
        text: outcome,
        ok: true,
        out: out_path,
    })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            match &out.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &out.text) {
                        eprintln!("error: {}", e);
                        return 1;
                    }
                }
                None => print!("{}", out.text),
            }
            if out.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {}", e);
            1
        }
    }
}
