use std::fs;
use std::path::{Path, PathBuf};

use clrar_core::assessment::{assess, JackknifeOptions};
use clrar_core::diagnostics::{chain_acf, geweke, running_quantiles, GewekeResult, GEWEKE_MIN_LEN};
use clrar_core::io::{self, DataMetadata, METADATA_SCHEMA_VERSION};
use clrar_core::model::{CensorDirection, CensoredSeries, DesignMatrix, InterceptMode};
use clrar_core::sampler::{posterior_summary, run_gda_msm, ModelSpec, ParamSummary};
use clrar_core::simstudy::{run_study, simulate_replication, Scenario};
use serde::Serialize;

use crate::cli::Cli;
use crate::config::{
    resolve, AssessConfig, CommandConfig, DataSource, FitConfig, RunConfig, ScenarioFile, SimulateConfig, StudyConfig,
};
use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

const GEWEKE_EARLY: f64 = 0.1;
const GEWEKE_LATE: f64 = 0.5;
const QUANTILE_PROBS: [f64; 2] = [0.25, 0.75];

/// Collects output files and writes them under one directory.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    names: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), names: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
        self.written.push(path);
        self.names.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("serialization failed", e))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Everything needed to reproduce a run.
#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    outputs: &'a [String],
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Reads a run configuration, or the configuration recorded in a manifest.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let bad = |e: serde_json::Error| CliError::usage(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&read_text(path)?).map_err(bad)?;
    let value = match value.get("config") {
        Some(inner) if value.get("tool").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(bad)
}

/// Runs the parsed command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let file = cli.config.as_deref().map(load_config).transpose()?;
    let config = resolve(file, cli.seed, &cli.command)?;
    execute(&config, &cli.out_dir, cli.jobs)
}

/// Runs a resolved configuration, writing outputs and a manifest to `out_dir`.
pub fn execute(config: &RunConfig, out_dir: &Path, jobs: usize) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs::new(out_dir)?;
    match &config.command {
        CommandConfig::Simulate(c) => simulate(config.seed, c, &mut out)?,
        CommandConfig::Fit(c) => fit(config.seed, c, &mut out)?,
        CommandConfig::Assess(c) => assess_cmd(config.seed, c, jobs, &mut out)?,
        CommandConfig::Study(c) => study(config.seed, c, jobs, &mut out)?,
    }
    let names = out.names.clone();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: "clrar",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command.name(),
        config,
        outputs: &names,
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(out.written)
}

fn simulate(seed: u64, c: &SimulateConfig, out: &mut Outputs) -> Result<(), CliError> {
    let scenario = Scenario {
        model: c.model,
        rho1: c.rho,
        censor_rate: c.censor,
        sample_size: c.n,
        replications: c.replication + 1,
        seed,
        direction: c.direction,
    };
    let data = simulate_replication(&scenario, c.replication)?;
    out.write("data.csv", &io::data_csv(&data.series, &data.design))?;
    let meta = DataMetadata {
        schema_version: METADATA_SCHEMA_VERSION,
        limit: data.series.limit(),
        direction: data.series.direction(),
        truth: Some(data.truth),
        seed: Some(seed),
        scenario: Some(scenario),
    };
    out.write_json("data.json", &meta)
}

fn load_data(source: &DataSource) -> Result<(CensoredSeries, DesignMatrix), CliError> {
    let meta: Option<DataMetadata> = source.metadata.as_deref().map(parse_json).transpose()?;
    let limit = source
        .limit
        .or(meta.as_ref().map(|m| m.limit))
        .ok_or_else(|| CliError::usage("censoring limit unknown: give --limit or --metadata"))?;
    let direction = source.direction.or(meta.as_ref().map(|m| m.direction)).unwrap_or(CensorDirection::Left);
    if !source.data.exists() {
        return Err(CliError::io(format!("cannot read {}", source.data.display()), "no such file"));
    }
    let (series, x) = io::read_data_csv(&source.data, limit, direction)?;
    let series = if source.log { series.ln()? } else { series };
    Ok((series, x))
}

#[derive(Serialize)]
struct FitSummary {
    schema_version: u32,
    order: usize,
    intercept: InterceptMode,
    observations: usize,
    censored: usize,
    limit: f64,
    direction: CensorDirection,
    retained_draws: usize,
    acceptance_rate: f64,
    step_scale: f64,
    parameters: Vec<ParamSummary>,
    geweke: Option<GewekeResult>,
}

fn fit(seed: u64, c: &FitConfig, out: &mut Outputs) -> Result<(), CliError> {
    let (series, x) = load_data(&c.source)?;
    let spec = ModelSpec { order: c.order, intercept: c.intercept };
    let chain = run_gda_msm(&series, &x, &spec, &c.chain.to_mcmc(seed, 0))?;
    let names = chain.parameter_names();

    out.write("draws.csv", &io::draws_csv(&chain))?;
    out.write("augmented.csv", &io::augmented_csv(&series, &chain.augmented))?;
    out.write("trace.csv", &io::trace_csv(&chain))?;

    let geweke = if chain.len() >= GEWEKE_MIN_LEN {
        let g = geweke(&chain, GEWEKE_EARLY, GEWEKE_LATE)?;
        out.write("geweke.csv", &io::geweke_csv(&g))?;
        Some(g)
    } else {
        None
    };
    if chain.len() >= 2 {
        let lags = c.acf_lags.min(chain.len() - 1);
        out.write("acf.csv", &io::acf_csv(&names, &chain_acf(&chain, lags)?))?;
    }
    let traces = (0..chain.width())
        .map(|col| running_quantiles(&chain.column(col), &QUANTILE_PROBS))
        .collect::<clrar_core::Result<Vec<_>>>()?;
    out.write("quantiles.csv", &io::quantiles_csv(&names, &QUANTILE_PROBS, &traces))?;

    let summary = FitSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        order: c.order,
        intercept: c.intercept,
        observations: series.len(),
        censored: series.censored_count(),
        limit: series.limit(),
        direction: series.direction(),
        retained_draws: chain.len(),
        acceptance_rate: chain.acceptance_rate,
        step_scale: chain.step_scale,
        parameters: posterior_summary(&chain)?,
        geweke,
    };
    out.write_json("summary.json", &summary)
}

fn assess_cmd(seed: u64, c: &AssessConfig, jobs: usize, out: &mut Outputs) -> Result<(), CliError> {
    let (series, x) = load_data(&c.source)?;
    let spec = ModelSpec { order: c.order, intercept: c.intercept };
    let options = JackknifeOptions {
        training_size: c.training_size,
        refit_stride: c.refit_stride,
        refit: c.refit.to_mcmc(seed, 1),
        jobs,
    };
    let report = assess(&series, &x, &spec, &c.chain.to_mcmc(seed, 0), &options)?;
    out.write("residuals.csv", &io::report_residuals_csv(&report))?;
    out.write_json("assessment.json", &report)
}

fn study(seed: u64, c: &StudyConfig, jobs: usize, out: &mut Outputs) -> Result<(), CliError> {
    let file: ScenarioFile = parse_json(&c.scenarios)?;
    let scenarios = file.into_scenarios(seed);
    let summary = run_study(&scenarios, &c.chain.to_mcmc(seed, 0), jobs)?;
    out.write("study.csv", &summary.to_csv())?;
    out.write("study.md", &summary.to_markdown())?;
    out.write_json("study.json", &summary)
}
