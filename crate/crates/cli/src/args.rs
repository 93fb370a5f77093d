//! Command-line flags and the matching TOML config sections.
//!
//! Every option is optional at this level so that flags can be layered over
//! a config file before defaults are applied.

use std::path::PathBuf;

use cbp_core::{ControlKind, InformationCriterion, Scheme};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "cbp",
    version,
    about = "Inference for controlled branching processes"
)]
pub struct Cli {
    /// TOML file with per-command sections; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, env = "CBP_THREADS")]
    pub threads: Option<usize>,

    /// Output file (stdout when absent).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    /// Print floats rounded to this many decimals instead of full precision.
    #[arg(long, global = true)]
    pub round: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a process and write its full family tree.
    Simulate(SimulateArgs),
    /// Complete-data estimates and confidence intervals.
    Mle(MleArgs),
    /// EM estimates from progenitor counts or generation sizes.
    Em(EmArgs),
    /// Exact observed-data log-likelihood and AIC at given parameters.
    Loglik(LoglikArgs),
    /// EM fits over control families and offspring supports, ranked by AIC.
    Scan(ScanArgs),
    /// Parametric bootstrap of the EM estimators under both schemes.
    Bootstrap(BootstrapArgs),
    /// Upper bounds on offspring configurations per generation.
    Trees(TreesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Mle(_) => "mle",
            Command::Em(_) => "em",
            Command::Loglik(_) => "loglik",
            Command::Scan(_) => "scan",
            Command::Bootstrap(_) => "bootstrap",
            Command::Trees(_) => "trees",
        }
    }
}

fn parse_criterion(s: &str) -> Result<InformationCriterion, String> {
    match s {
        "corrected" | "aicc" => Ok(InformationCriterion::Corrected),
        "plain" | "aic" => Ok(InformationCriterion::Plain),
        other => Err(format!(
            "unknown criterion {other:?} (expected corrected or plain)"
        )),
    }
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Offspring probabilities p_0..p_s, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Control family: binomial, poisson or negative-binomial.
    #[arg(long)]
    pub family: Option<ControlKind>,
    /// Control parameter theta.
    #[arg(long, conflicts_with = "mu")]
    pub theta: Option<f64>,
    /// Control mean per individual, converted to theta.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Initial population size.
    #[arg(long)]
    pub z0: Option<usize>,
    /// Number of generations.
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleArgs {
    /// Full family tree CSV.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<ControlKind>,
    /// Confidence level of the intervals.
    #[arg(long)]
    pub level: Option<f64>,
    /// Emit estimates for every prefix of the sample.
    #[arg(long)]
    #[serde(default)]
    pub evolve: bool,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Which part of the sample to use (default: progenitors when present).
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub family: Option<ControlKind>,
    /// Largest offspring count.
    #[arg(long)]
    pub s_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Random starts for the sizes scheme.
    #[arg(long)]
    pub multi_start: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the per-iteration trace of the reported fit to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write one row per random start to this CSV.
    #[arg(long)]
    pub starts: Option<PathBuf>,
    /// Emit estimates for every prefix of the sample.
    #[arg(long)]
    #[serde(default)]
    pub evolve: bool,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoglikArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Offspring probabilities p_0..p_s, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Control family: binomial, poisson or negative-binomial.
    #[arg(long)]
    pub family: Option<ControlKind>,
    /// Control parameter theta.
    #[arg(long, conflicts_with = "mu")]
    pub theta: Option<f64>,
    /// Control mean per individual, converted to theta.
    #[arg(long)]
    pub mu: Option<f64>,
    /// corrected (AICc) or plain.
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<InformationCriterion>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Control families to fit, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<ControlKind>>,
    /// Offspring supports to fit, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub s_max: Option<Vec<usize>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Random starts per cell for the sizes scheme.
    #[arg(long)]
    pub n_starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<InformationCriterion>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapArgs {
    /// Full tree or progenitor CSV; each scheme is bootstrapped from its own fit.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Restrict to one scheme (default: both, with efficiencies).
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub family: Option<ControlKind>,
    #[arg(long)]
    pub s_max: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Generations per replicate (default: those of the input).
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Random starts for each sizes-scheme re-fit.
    #[arg(long)]
    pub n_starts: Option<usize>,
    /// Random starts for the sizes-scheme fit to the input.
    #[arg(long)]
    pub fit_starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write every replicate estimate to this CSV (long form).
    #[arg(long)]
    pub replicates: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreesArgs {
    #[arg(long, value_delimiter = ',')]
    pub s_max: Option<Vec<usize>>,
    #[arg(long)]
    pub z_max: Option<usize>,
}

/// The config file: one optional section per command.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: Option<SimulateArgs>,
    pub mle: Option<MleArgs>,
    pub em: Option<EmArgs>,
    pub loglik: Option<LoglikArgs>,
    pub scan: Option<ScanArgs>,
    pub bootstrap: Option<BootstrapArgs>,
    pub trees: Option<TreesArgs>,
}

/// Fills every unset field of `self` from `file`.
pub trait Layer {
    fn layer(self, file: Self) -> Self;
}

macro_rules! layer {
    ($ty:ty { $($opt:ident),* } { $($flag:ident),* }) => {
        impl Layer for $ty {
            fn layer(self, file: Self) -> Self {
                Self {
                    $($opt: self.$opt.or(file.$opt),)*
                    $($flag: self.$flag || file.$flag,)*
                }
            }
        }
    };
}

/// `theta` and `mu` are alternatives: the file's pair is used only when the
/// flags set neither.
fn control_pair(
    flags: (Option<f64>, Option<f64>),
    file: (Option<f64>, Option<f64>),
) -> (Option<f64>, Option<f64>) {
    if flags.0.is_some() || flags.1.is_some() {
        flags
    } else {
        file
    }
}

impl Layer for SimulateArgs {
    fn layer(self, file: Self) -> Self {
        let (theta, mu) = control_pair((self.theta, self.mu), (file.theta, file.mu));
        Self {
            p: self.p.or(file.p),
            family: self.family.or(file.family),
            theta,
            mu,
            z0: self.z0.or(file.z0),
            generations: self.generations.or(file.generations),
            seed: self.seed.or(file.seed),
        }
    }
}

impl Layer for LoglikArgs {
    fn layer(self, file: Self) -> Self {
        let (theta, mu) = control_pair((self.theta, self.mu), (file.theta, file.mu));
        Self {
            input: self.input.or(file.input),
            scheme: self.scheme.or(file.scheme),
            p: self.p.or(file.p),
            family: self.family.or(file.family),
            theta,
            mu,
            criterion: self.criterion.or(file.criterion),
        }
    }
}

layer!(MleArgs { input, family, level } { evolve });
layer!(EmArgs { input, scheme, family, s_max, tol, max_iters, multi_start, seed, trace, starts } { evolve });
layer!(ScanArgs { input, scheme, families, s_max, tol, max_iters, n_starts, seed, criterion } {});
layer!(BootstrapArgs {
    input, scheme, family, s_max, reps, generations, tol, max_iters, n_starts, fit_starts, seed, replicates
} {});
layer!(TreesArgs { s_max, z_max } {});
