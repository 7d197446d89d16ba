use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "mris",
    version,
    about = "Analyses of repeated-interaction models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Directory receiving tables, scripts and the run report.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Upper bound on worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Tolerance override `NAME=VALUE` (herm, trace, psd, tp, unit, degeneracy, consistency).
    #[arg(long = "tol", value_parser = parse_tolerance)]
    pub tol: Vec<(String, f64)>,
}

pub fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let x: f64 = v.trim().parse().map_err(|e| format!("{v:?}: {e}"))?;
    Ok((k.trim().to_string(), x))
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check complete positivity, trace preservation and the structural assumptions.
    Validate(Common),
    /// Spectrum, period and gap of the generator and of the chain.
    Classify(Common),
    /// The extended steady state.
    Ess(Common),
    /// Monte Carlo entropy increments with law-of-large-numbers and CLT summaries.
    Simulate(SimulateArgs),
    /// The cumulant generating function and its symmetries.
    Cumulant(CumulantArgs),
    /// Rate functions of the flux vector and of the total entropy production.
    Ratefn(RatefnArgs),
    /// Kinetic coefficients, fluctuation-dissipation and Green-Kubo checks.
    Linresp(LinrespArgs),
    /// Distance to the instantaneous steady state along slow chain schedules.
    Adiabatic(AdiabaticArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Validate(_) => "validate",
            Self::Classify(_) => "classify",
            Self::Ess(_) => "ess",
            Self::Simulate(_) => "simulate",
            Self::Cumulant(_) => "cumulant",
            Self::Ratefn(_) => "ratefn",
            Self::Linresp(_) => "linresp",
            Self::Adiabatic(_) => "adiabatic",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::Validate(c) | Self::Classify(c) | Self::Ess(c) => c,
            Self::Simulate(a) => &a.common,
            Self::Cumulant(a) => &a.common,
            Self::Ratefn(a) => &a.common,
            Self::Linresp(a) => &a.common,
            Self::Adiabatic(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Interactions per trajectory.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Number of independent trajectories.
    #[arg(long, default_value_t = 200)]
    pub traj: usize,
    /// Also write every step of every trajectory as JSON.
    #[arg(long)]
    pub record: bool,
    /// Allowed distance of the sample means from the steady rates, in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    /// Add a verdict on the relative Frobenius distance of the covariance.
    #[arg(long)]
    pub clt: bool,
    #[arg(long, default_value_t = 0.1)]
    pub clt_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CumulantArgs {
    #[command(flatten)]
    pub common: Common,
    /// Start of the diagonal line `α = t𝟙`.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 31)]
    pub points: usize,
    /// Inverse-temperature shifts applied before the analysis, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct RatefnArgs {
    #[command(flatten)]
    pub common: Common,
    /// Points per grid (odd counts include the origin).
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    /// Half-width of the entropy-production grid; defaults to three times the mean rate.
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct LinrespArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of correlation lags kept on each side.
    #[arg(long, default_value_t = 400)]
    pub lag_cap: usize,
    /// Damping rates of the truncated Green-Kubo sums, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.08, 0.04, 0.02, 0.01])]
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Linear,
    Smoothstep,
}

#[derive(Debug, Clone, Args)]
pub struct AdiabaticArgs {
    #[command(flatten)]
    pub common: Common,
    /// Final transition matrix as JSON rows, e.g. `[[0.2,0.8],[0.6,0.4]]`.
    #[arg(long)]
    pub p1: String,
    #[arg(long, value_enum, default_value_t = Shape::Linear)]
    pub shape: Shape,
    /// Step counts `1/ε`, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 128, 256])]
    pub sweeps: Vec<usize>,
}
