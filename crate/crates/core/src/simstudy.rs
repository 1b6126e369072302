//! Synthetic CLR-AR(1) data and the replication harness.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_id, RngStream};
use crate::error::{Error, Result};
use crate::model::{CensorDirection, CensoredSeries, DesignMatrix, ParamDraw};
use crate::sampler::{mean, run_gda_msm, sample_variance, McmcConfig, ModelSpec};

const AR_BURN_IN: usize = 500;

// Stream purposes.
const PURPOSE_COVARIATES: u64 = 1;
const PURPOSE_NOISE: u64 = 2;
const PURPOSE_FIT: u64 = 3;

/// Parameter sets of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimModel {
    /// Intercept only: `beta = (2)`, `sigma2 = 2`.
    M1,
    /// `beta = (2, 1)`, `sigma2 = 2`.
    M2,
    /// `beta = (0.2, 0.4)`, `sigma2 = 0.607`.
    M3,
}

impl SimModel {
    pub fn beta(self) -> Vec<f64> {
        match self {
            SimModel::M1 => vec![2.0],
            SimModel::M2 => vec![2.0, 1.0],
            SimModel::M3 => vec![0.2, 0.4],
        }
    }

    pub fn sigma2(self) -> f64 {
        match self {
            SimModel::M1 | SimModel::M2 => 2.0,
            SimModel::M3 => 0.607,
        }
    }

    fn index(self) -> u64 {
        match self {
            SimModel::M1 => 1,
            SimModel::M2 => 2,
            SimModel::M3 => 3,
        }
    }
}

impl std::str::FromStr for SimModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(SimModel::M1),
            "M2" => Ok(SimModel::M2),
            "M3" => Ok(SimModel::M3),
            other => Err(Error::InvalidScenario(format!("unknown model `{other}` (expected M1, M2 or M3)"))),
        }
    }
}

fn default_direction() -> CensorDirection {
    CensorDirection::Left
}

fn default_replications() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: SimModel,
    pub rho1: f64,
    /// Target censored fraction in `[0, 1)`.
    pub censor_rate: f64,
    pub sample_size: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_direction")]
    pub direction: CensorDirection,
}

impl Scenario {
    pub fn new(model: SimModel, rho1: f64, censor_rate: f64, sample_size: usize) -> Self {
        Self { model, rho1, censor_rate, sample_size, replications: 1, seed: 0, direction: CensorDirection::Left }
    }

    /// The full 3 x 6 x 3 x 3 design grid.
    pub fn full_grid(replications: usize, seed: u64) -> Vec<Scenario> {
        let mut out = Vec::new();
        for model in [SimModel::M1, SimModel::M2, SimModel::M3] {
            for rho1 in [-0.8, -0.48, -0.15, 0.15, 0.48, 0.8] {
                for sample_size in [100, 500, 1000] {
                    for censor_rate in [0.05, 0.20, 0.40] {
                        out.push(Scenario {
                            replications,
                            seed,
                            ..Scenario::new(model, rho1, censor_rate, sample_size)
                        });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho1.is_finite() && self.rho1.abs() < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "rho1 = {} violates the stationarity constraint |rho1| < 1",
                self.rho1
            )));
        }
        if !(0.0..1.0).contains(&self.censor_rate) {
            return Err(Error::InvalidScenario(format!("censor rate {} must lie in [0, 1)", self.censor_rate)));
        }
        let k = self.model.beta().len();
        if self.sample_size <= k + 1 {
            return Err(Error::InvalidScenario(format!("sample size {} is too small", self.sample_size)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidScenario("at least one replication is required".into()));
        }
        Ok(())
    }

    /// Stable identifier used to key random streams.
    pub fn id(&self) -> u64 {
        stream_id(&[
            self.model.index(),
            self.rho1.to_bits(),
            self.censor_rate.to_bits(),
            self.sample_size as u64,
            matches!(self.direction, CensorDirection::Right) as u64,
        ])
    }

    pub fn truth(&self) -> ParamDraw {
        ParamDraw { beta: self.model.beta(), rho: vec![self.rho1], sigma2: self.model.sigma2() }
    }

    /// Design matrix shared by every replication of the scenario.
    pub fn design(&self) -> Result<DesignMatrix> {
        let t = self.sample_size;
        match self.model {
            SimModel::M1 => Ok(DesignMatrix::intercept_only(t)),
            SimModel::M2 | SimModel::M3 => {
                let mut rng = RngStream::keyed(self.seed, &[self.id(), PURPOSE_COVARIATES]);
                let x2: Vec<f64> = (0..t).map(|_| rng.standard_normal()).collect();
                DesignMatrix::with_covariates(t, &[x2])
            }
        }
    }

    pub fn noise_stream(&self, replication: usize) -> RngStream {
        RngStream::keyed(self.seed, &[self.id(), replication as u64, PURPOSE_NOISE])
    }

    pub fn fit_stream_id(&self, replication: usize) -> u64 {
        stream_id(&[self.id(), replication as u64, PURPOSE_FIT])
    }
}

/// One synthetic data set.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub series: CensoredSeries,
    pub design: DesignMatrix,
    pub latent: Vec<f64>,
    pub truth: ParamDraw,
}

/// Draws one data set; `rng` drives the AR errors.
///
/// The AR recursion starts from its stationary distribution and runs a
/// burn-in before the kept stretch. The limit is the empirical quantile of
/// the latent series, so the realized censored fraction is within `1/T`
/// of the target.
pub fn simulate(scenario: &Scenario, rng: &mut RngStream) -> Result<Simulated> {
    scenario.validate()?;
    let t_len = scenario.sample_size;
    let design = scenario.design()?;
    let truth = scenario.truth();
    let rho = scenario.rho1;
    let sd = truth.sigma2.sqrt();

    let mut u = sd / (1.0 - rho * rho).sqrt() * rng.standard_normal();
    for _ in 0..AR_BURN_IN {
        u = rho * u + sd * rng.standard_normal();
    }
    let fit = design.fitted(&truth.beta);
    let latent: Vec<f64> = fit
        .iter()
        .map(|m| {
            u = rho * u + sd * rng.standard_normal();
            m + u
        })
        .collect();

    let censored = (scenario.censor_rate * t_len as f64).round() as usize;
    let mut sorted = latent.clone();
    sorted.sort_by(f64::total_cmp);
    let limit = match (censored, scenario.direction) {
        (0, CensorDirection::Left) => sorted[0] - 1.0,
        (0, CensorDirection::Right) => sorted[t_len - 1] + 1.0,
        (c, CensorDirection::Left) => sorted[c - 1],
        (c, CensorDirection::Right) => sorted[t_len - c],
    };
    let series = CensoredSeries::from_latent(&latent, limit, scenario.direction)?;
    Ok(Simulated { series, design, latent, truth })
}

pub fn simulate_replication(scenario: &Scenario, replication: usize) -> Result<Simulated> {
    simulate(scenario, &mut scenario.noise_stream(replication))
}

/// Posterior means of one replication, or why it failed.
pub type ReplicationOutcome = std::result::Result<Vec<f64>, String>;

pub fn run_replication(scenario: &Scenario, replication: usize, mcmc: &McmcConfig) -> Result<Vec<f64>> {
    let data = simulate_replication(scenario, replication)?;
    let config = mcmc.clone().with_seed(scenario.seed, scenario.fit_stream_id(replication));
    let chain = run_gda_msm(&data.series, &data.design, &ModelSpec::ar(1), &config)?;
    Ok(chain.posterior_means())
}

/// Cross-replication summary for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    /// Chain order: `beta.., rho1, sigma2`.
    pub parameter_names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub successes: usize,
    pub failures: Vec<String>,
}

impl ScenarioSummary {
    fn from_outcomes(scenario: &Scenario, outcomes: &[ReplicationOutcome]) -> Self {
        let k = scenario.model.beta().len();
        let parameter_names: Vec<String> =
            (0..k).map(|i| format!("beta{i}")).chain(["rho1".to_string(), "sigma2".to_string()]).collect();
        let ok: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let failures = outcomes
            .iter()
            .enumerate()
            .filter_map(|(r, o)| o.as_ref().err().map(|e| format!("replication {r}: {e}")))
            .collect();
        let width = parameter_names.len();
        let (means, sds) = (0..width)
            .map(|c| {
                let col: Vec<f64> = ok.iter().map(|row| row[c]).collect();
                if col.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    (mean(&col), sample_variance(&col).sqrt())
                }
            })
            .unzip();
        Self { scenario: scenario.clone(), parameter_names, means, sds, successes: ok.len(), failures }
    }

    /// Mean and SD of a named parameter.
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        Some((self.means[i], self.sds[i]))
    }

    /// Values in display order: `beta0, beta1, sigma2, rho` (beta1 absent for M1).
    fn display_order(&self) -> Vec<Option<(f64, f64)>> {
        vec![self.get("beta0"), self.get("beta1"), self.get("sigma2"), self.get("rho1")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub rows: Vec<ScenarioSummary>,
}

/// Runs every replication of every scenario on `jobs` worker threads.
/// Results are independent of `jobs`.
pub fn run_study(scenarios: &[Scenario], mcmc: &McmcConfig, jobs: usize) -> Result<StudySummary> {
    if scenarios.is_empty() {
        return Err(Error::InvalidScenario("scenario list is empty".into()));
    }
    for s in scenarios {
        s.validate()?;
    }
    mcmc.validate()?;
    let tasks: Vec<(usize, usize)> =
        scenarios.iter().enumerate().flat_map(|(i, s)| (0..s.replications).map(move |r| (i, r))).collect();
    let run = || -> Vec<ReplicationOutcome> {
        tasks.par_iter().map(|&(i, r)| run_replication(&scenarios[i], r, mcmc).map_err(|e| e.to_string())).collect()
    };
    let outcomes = with_jobs(jobs, run)?;

    let mut rows = Vec::with_capacity(scenarios.len());
    let mut offset = 0;
    for s in scenarios {
        rows.push(ScenarioSummary::from_outcomes(s, &outcomes[offset..offset + s.replications]));
        offset += s.replications;
    }
    Ok(StudySummary { rows })
}

/// Runs `f` on a dedicated pool with `jobs` threads (0 means rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub const STUDY_CSV_SCHEMA: &str = "# schema: clrar-study/1";

impl StudySummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{STUDY_CSV_SCHEMA}").unwrap();
        writeln!(
            out,
            "model,rho1,n,censor_rate,direction,replications,successes,beta0_mean,beta0_sd,beta1_mean,beta1_sd,sigma2_mean,sigma2_sd,rho_mean,rho_sd"
        )
        .unwrap();
        for row in &self.rows {
            let s = &row.scenario;
            write!(
                out,
                "{:?},{},{},{},{},{},{}",
                s.model,
                s.rho1,
                s.sample_size,
                s.censor_rate,
                format!("{:?}", s.direction).to_lowercase(),
                s.replications,
                row.successes
            )
            .unwrap();
            for v in row.display_order() {
                match v {
                    Some((m, sd)) => write!(out, ",{m:.6},{sd:.6}").unwrap(),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// One table per `(model, rho1)` with rows by sample size and censoring.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut groups: Vec<(SimModel, f64)> = Vec::new();
        for row in &self.rows {
            let key = (row.scenario.model, row.scenario.rho1);
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
        for (model, rho1) in groups {
            let truth = Scenario::new(model, rho1, 0.0, 10).truth();
            writeln!(out, "### Model {model:?}, rho = {rho1}\n").unwrap();
            let mut header = format!("| n | % of cen | beta0={} |", truth.beta[0]);
            let has_slope = truth.beta.len() > 1;
            if has_slope {
                write!(header, " beta1={} |", truth.beta[1]).unwrap();
            }
            write!(header, " sigma2={} | rho={} |", truth.sigma2, rho1).unwrap();
            writeln!(out, "{header}").unwrap();
            let cols = if has_slope { 6 } else { 5 };
            writeln!(out, "|{}", "---|".repeat(cols)).unwrap();
            for row in self.rows.iter().filter(|r| r.scenario.model == model && r.scenario.rho1 == rho1) {
                let mut line =
                    format!("| {} | {}% |", row.scenario.sample_size, (row.scenario.censor_rate * 100.0).round());
                for v in row.display_order().into_iter().flatten() {
                    write!(line, " {:.3} ({:.3}) |", v.0, v.1).unwrap();
                }
                writeln!(out, "{line}").unwrap();
                for f in &row.failures {
                    writeln!(out, "\n> failed: {f}\n").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}
