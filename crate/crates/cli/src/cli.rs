use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clrar_core::model::{CensorDirection, InterceptMode};
use clrar_core::simstudy::SimModel;

/// Bayesian censored regression with AR(p) errors.
#[derive(Debug, Parser)]
#[command(name = "clrar", version)]
pub struct Cli {
    /// Random seed for every stream used by the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON run configuration; flags given here override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for all outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads for study and assessment (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one censored CLR-AR(1) data set.
    Simulate(SimulateArgs),
    /// Run the sampler on a data set.
    Fit(FitArgs),
    /// Jackknife residuals, DIC and WAIC for one model order.
    Assess(AssessArgs),
    /// Replicated simulation study over a scenario list.
    Study(StudyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Assess(_) => "assess",
            Command::Study(_) => "study",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation model: M1, M2 or M3.
    #[arg(long)]
    pub model: Option<SimModel>,
    /// AR(1) coefficient.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Series length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Target censored fraction.
    #[arg(long)]
    pub censor: Option<f64>,
    /// Censoring side: left or right.
    #[arg(long)]
    pub direction: Option<CensorDirection>,
    /// Replication index within the scenario.
    #[arg(long)]
    pub replication: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Data CSV with columns `y`, optional `censored`, and covariates `x*`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metadata JSON giving the limit and direction.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Censoring limit (on the original scale when --log is set).
    #[arg(long, allow_hyphen_values = true)]
    pub limit: Option<f64>,
    /// Censoring side: left or right (default left).
    #[arg(long)]
    pub direction: Option<CensorDirection>,
    /// Take natural logs of the series and limit before fitting.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Total Gibbs sweeps.
    #[arg(long, visible_alias = "N")]
    pub iterations: Option<usize>,
    /// Burn-in sweeps.
    #[arg(long, visible_alias = "burn-in")]
    pub burn: Option<usize>,
    /// Keep every thin-th sweep after burn-in.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Truncated-normal draws averaged per censored point.
    #[arg(long)]
    pub m: Option<usize>,
    /// Initial random-walk scale for the AR coefficients.
    #[arg(long)]
    pub step: Option<f64>,
    /// Keep the random-walk scale fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// AR order.
    #[arg(long, visible_alias = "order")]
    pub p: Option<usize>,
    /// Intercept row of the whitened design: transformed or unit.
    #[arg(long)]
    pub intercept: Option<InterceptMode>,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Largest lag in the autocorrelation output.
    #[arg(long)]
    pub acf_lags: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// AR order.
    #[arg(long, visible_alias = "order")]
    pub p: Option<usize>,
    /// Intercept row of the whitened design: transformed or unit.
    #[arg(long)]
    pub intercept: Option<InterceptMode>,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Initial training size n.
    #[arg(long = "training", visible_alias = "train")]
    pub training: Option<usize>,
    /// Refit every this many steps, carrying the last fit forward.
    #[arg(long)]
    pub refit_stride: Option<usize>,
    /// Total sweeps per refit.
    #[arg(long)]
    pub refit_iterations: Option<usize>,
    /// Burn-in sweeps per refit.
    #[arg(long)]
    pub refit_burn: Option<usize>,
    /// Thinning interval per refit.
    #[arg(long)]
    pub refit_thin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// JSON scenario list, or `{"full_grid": {"replications": R}}`.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
}
