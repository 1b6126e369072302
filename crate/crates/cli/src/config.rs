//! Resolved run configuration: file values overlaid by command-line flags.

use std::path::PathBuf;

use clrar_core::model::{CensorDirection, InterceptMode};
use clrar_core::sampler::McmcConfig;
use clrar_core::simstudy::{Scenario, SimModel};
use serde::{Deserialize, Serialize};

use crate::cli::{AssessArgs, ChainArgs, Command, DataArgs, FitArgs, SimulateArgs, StudyArgs};
use crate::CliError;

/// Everything that determines a run's outputs. Output placement and
/// thread count are deliberately absent: neither changes any result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandConfig {
    Simulate(SimulateConfig),
    Fit(FitConfig),
    Assess(AssessConfig),
    Study(StudyConfig),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Simulate(_) => "simulate",
            CommandConfig::Fit(_) => "fit",
            CommandConfig::Assess(_) => "assess",
            CommandConfig::Study(_) => "study",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: SimModel,
    pub rho: f64,
    pub n: usize,
    pub censor: f64,
    pub direction: CensorDirection,
    pub replication: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { model: SimModel::M2, rho: 0.48, n: 500, censor: 0.2, direction: CensorDirection::Left, replication: 0 }
    }
}

/// Where the observed series comes from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub data: PathBuf,
    /// Metadata JSON written by `simulate`; supplies limit and direction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<CensorDirection>,
    /// Natural log of values and limit before fitting.
    pub log: bool,
}

/// Chain settings; the seed comes from [`RunConfig::seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub augmentation_samples: usize,
    pub mh_step_scale: f64,
    pub adapt_during_burn_in: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self::from(&McmcConfig::default())
    }
}

impl From<&McmcConfig> for ChainSettings {
    fn from(c: &McmcConfig) -> Self {
        Self {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            augmentation_samples: c.augmentation_samples,
            mh_step_scale: c.mh_step_scale,
            adapt_during_burn_in: c.adapt_during_burn_in,
        }
    }
}

impl ChainSettings {
    pub fn to_mcmc(&self, seed: u64, stream: u64) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            augmentation_samples: self.augmentation_samples,
            mh_step_scale: self.mh_step_scale,
            adapt_during_burn_in: self.adapt_during_burn_in,
            seed,
            stream,
        }
    }

    fn apply(&mut self, a: &ChainArgs) {
        set(&mut self.iterations, a.iterations);
        set(&mut self.burn_in, a.burn);
        set(&mut self.thin, a.thin);
        set(&mut self.augmentation_samples, a.m);
        set(&mut self.mh_step_scale, a.step);
        if a.no_adapt {
            self.adapt_during_burn_in = false;
        }
    }
}

fn default_order() -> usize {
    1
}

fn default_acf_lags() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub source: DataSource,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub intercept: InterceptMode,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default = "default_acf_lags")]
    pub acf_lags: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            source: DataSource::default(),
            order: 1,
            intercept: InterceptMode::default(),
            chain: ChainSettings::default(),
            acf_lags: default_acf_lags(),
        }
    }
}

fn default_training() -> usize {
    600
}

fn default_stride() -> usize {
    1
}

fn default_refit() -> ChainSettings {
    ChainSettings::from(&McmcConfig::refit())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessConfig {
    #[serde(default)]
    pub source: DataSource,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub intercept: InterceptMode,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default = "default_refit")]
    pub refit: ChainSettings,
    #[serde(default = "default_training")]
    pub training_size: usize,
    #[serde(default = "default_stride")]
    pub refit_stride: usize,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            source: DataSource::default(),
            order: 1,
            intercept: InterceptMode::default(),
            chain: ChainSettings::default(),
            refit: default_refit(),
            training_size: default_training(),
            refit_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenarios: PathBuf,
    #[serde(default)]
    pub chain: ChainSettings,
}

/// Contents of a scenario file: an explicit list or the full design grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScenarioFile {
    List(Vec<Scenario>),
    Grid { full_grid: GridSpec },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub replications: usize,
}

impl ScenarioFile {
    pub fn into_scenarios(self, seed: u64) -> Vec<Scenario> {
        match self {
            ScenarioFile::List(list) => list.into_iter().map(|s| Scenario { seed, ..s }).collect(),
            ScenarioFile::Grid { full_grid } => Scenario::full_grid(full_grid.replications, seed),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl DataSource {
    fn apply(&mut self, a: &DataArgs) {
        set(&mut self.data, a.data.clone());
        if a.metadata.is_some() {
            self.metadata = a.metadata.clone();
        }
        if a.limit.is_some() {
            self.limit = a.limit;
        }
        if a.direction.is_some() {
            self.direction = a.direction;
        }
        if a.log {
            self.log = true;
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if self.data.as_os_str().is_empty() {
            return Err(CliError::usage("a data file is required (--data)"));
        }
        if self.metadata.is_none() && self.limit.is_none() {
            return Err(CliError::usage("give either --metadata or --limit"));
        }
        Ok(())
    }
}

/// Loads the optional config file and overlays the subcommand's flags.
pub fn resolve(file: Option<RunConfig>, seed: Option<u64>, command: &Command) -> Result<RunConfig, CliError> {
    let from_file = file.as_ref().map(|f| f.command.clone());
    if let (Some(f), name) = (&from_file, command.name()) {
        if f.name() != name {
            return Err(CliError::usage(format!("config file is for `{}` but `{name}` was requested", f.name())));
        }
    }
    let seed = seed.or(file.as_ref().map(|f| f.seed)).unwrap_or(0);
    let command = match command {
        Command::Simulate(a) => CommandConfig::Simulate(resolve_simulate(from_file, a)),
        Command::Fit(a) => CommandConfig::Fit(resolve_fit(from_file, a)?),
        Command::Assess(a) => CommandConfig::Assess(resolve_assess(from_file, a)?),
        Command::Study(a) => CommandConfig::Study(resolve_study(from_file, a)?),
    };
    Ok(RunConfig { seed, command })
}

fn resolve_simulate(file: Option<CommandConfig>, a: &SimulateArgs) -> SimulateConfig {
    let mut c = match file {
        Some(CommandConfig::Simulate(c)) => c,
        _ => SimulateConfig::default(),
    };
    set(&mut c.model, a.model);
    set(&mut c.rho, a.rho);
    set(&mut c.n, a.n);
    set(&mut c.censor, a.censor);
    set(&mut c.direction, a.direction);
    set(&mut c.replication, a.replication);
    c
}

fn resolve_fit(file: Option<CommandConfig>, a: &FitArgs) -> Result<FitConfig, CliError> {
    let mut c = match file {
        Some(CommandConfig::Fit(c)) => c,
        _ => FitConfig::default(),
    };
    c.source.apply(&a.data);
    set(&mut c.order, a.p);
    set(&mut c.intercept, a.intercept);
    c.chain.apply(&a.chain);
    set(&mut c.acf_lags, a.acf_lags);
    c.source.check()?;
    Ok(c)
}

fn resolve_assess(file: Option<CommandConfig>, a: &AssessArgs) -> Result<AssessConfig, CliError> {
    let mut c = match file {
        Some(CommandConfig::Assess(c)) => c,
        _ => AssessConfig::default(),
    };
    c.source.apply(&a.data);
    set(&mut c.order, a.p);
    set(&mut c.intercept, a.intercept);
    c.chain.apply(&a.chain);
    set(&mut c.refit.iterations, a.refit_iterations);
    set(&mut c.refit.burn_in, a.refit_burn);
    set(&mut c.refit.thin, a.refit_thin);
    set(&mut c.training_size, a.training);
    set(&mut c.refit_stride, a.refit_stride);
    c.source.check()?;
    Ok(c)
}

fn resolve_study(file: Option<CommandConfig>, a: &StudyArgs) -> Result<StudyConfig, CliError> {
    let mut c = match file {
        Some(CommandConfig::Study(c)) => c,
        _ => StudyConfig::default(),
    };
    set(&mut c.scenarios, a.scenarios.clone());
    c.chain.apply(&a.chain);
    if c.scenarios.as_os_str().is_empty() {
        return Err(CliError::usage("a scenario file is required (--scenarios)"));
    }
    Ok(c)
}
