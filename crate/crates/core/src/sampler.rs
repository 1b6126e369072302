//! Gibbs sampling with mean-of-multiple-samples data augmentation.
//!
//! One sweep draws `beta | sigma2, rho, z` (normal around the FGLS
//! estimate), `sigma2 | beta, rho, z` (inverse gamma), `rho | beta, sigma2, z`
//! (random-walk Metropolis-Hastings restricted to the stationarity region)
//! and then re-imputes every censored point as the average of `m` draws from
//! its truncated one-step conditional.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_inverse_gamma, RngStream, TruncatedNormal};
use crate::error::{Error, Result};
use crate::model::{
    self, conditional_from_parts, is_stationary, project_stationary, residual_sum_of_squares, CensoredSeries,
    DesignMatrix, InterceptMode, ParamDraw, QTransform,
};

const TARGET_ACCEPTANCE: f64 = 0.30;
const MIN_LOG_STEP: f64 = -11.5;
const MAX_LOG_STEP: f64 = 0.7;

/// Model structure that is not carried by the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// AR order `p`; zero fits plain censored regression.
    pub order: usize,
    #[serde(default)]
    pub intercept: InterceptMode,
}

impl ModelSpec {
    pub fn ar(order: usize) -> Self {
        Self { order, intercept: InterceptMode::Transformed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Truncated-normal draws averaged per censored point per sweep.
    pub augmentation_samples: usize,
    /// Initial random-walk standard deviation for `rho`.
    pub mh_step_scale: f64,
    pub adapt_during_burn_in: bool,
    pub seed: u64,
    pub stream: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 40_000,
            burn_in: 20_000,
            thin: 20,
            augmentation_samples: 5,
            mh_step_scale: 0.1,
            adapt_during_burn_in: true,
            seed: 0,
            stream: 0,
        }
    }
}

impl McmcConfig {
    /// Short chains used for leave-future-out refits.
    pub fn refit() -> Self {
        Self { iterations: 5_000, burn_in: 2_500, thin: 5, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64, stream: u64) -> Self {
        self.seed = seed;
        self.stream = stream;
        self
    }

    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.burn_in >= self.iterations {
            0
        } else {
            (self.iterations - self.burn_in) / self.thin
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::ConfigInvalid("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::ConfigInvalid(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::ConfigInvalid("thin must be positive".into()));
        }
        if self.augmentation_samples == 0 {
            return Err(Error::ConfigInvalid("augmentation samples m must be positive".into()));
        }
        if !(self.mh_step_scale > 0.0 && self.mh_step_scale.is_finite()) {
            return Err(Error::ConfigInvalid("MH step scale must be positive".into()));
        }
        if self.retained() == 0 {
            return Err(Error::ConfigInvalid("no draws retained: (iterations - burn_in) / thin < 1".into()));
        }
        Ok(())
    }
}

/// Retained posterior draws of one GDA-MSM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Row-major, one row per retained draw: `beta.., rho.., sigma2`.
    draws: Vec<f64>,
    k: usize,
    p: usize,
    /// Augmented series after the final sweep.
    pub augmented: Vec<f64>,
    /// MH acceptance rate for `rho` over the post-burn-in sweeps.
    pub acceptance_rate: f64,
    /// Random-walk scale after adaptation.
    pub step_scale: f64,
    pub config: McmcConfig,
}

impl Chain {
    /// Builds a chain from explicit rows; every row must be a valid [`ParamDraw`].
    pub fn from_rows(rows: &[Vec<f64>], k: usize, p: usize, augmented: Vec<f64>, config: McmcConfig) -> Result<Self> {
        let width = k + p + 1;
        let mut draws = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::LengthMismatch { expected: width, found: row.len() });
            }
            let d = ParamDraw::from_slice(row, k, p);
            ParamDraw::new(d.beta, d.rho, d.sigma2)?;
            draws.extend_from_slice(row);
        }
        Ok(Self { draws, k, p, augmented, acceptance_rate: f64::NAN, step_scale: f64::NAN, config })
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn regressors(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn width(&self) -> usize {
        self.k + self.p + 1
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.width();
        &self.draws[j * w..(j + 1) * w]
    }

    pub fn draw(&self, j: usize) -> ParamDraw {
        ParamDraw::from_slice(self.row(j), self.k, self.p)
    }

    pub fn draws(&self) -> impl Iterator<Item = ParamDraw> + '_ {
        (0..self.len()).map(|j| self.draw(j))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.row(j)[c]).collect()
    }

    /// `beta0.., rho1.., sigma2`.
    pub fn parameter_names(&self) -> Vec<String> {
        (0..self.k)
            .map(|i| format!("beta{i}"))
            .chain((1..=self.p).map(|i| format!("rho{i}")))
            .chain(std::iter::once("sigma2".to_string()))
            .collect()
    }

    /// Every `step`-th draw.
    pub fn thinned(&self, step: usize) -> Chain {
        let w = self.width();
        let draws =
            (0..self.len()).step_by(step.max(1)).flat_map(|j| self.draws[j * w..(j + 1) * w].to_vec()).collect();
        Chain { draws, ..self.clone() }
    }

    pub fn posterior_means(&self) -> Vec<f64> {
        (0..self.width()).map(|c| mean(&self.column(c))).collect()
    }
}

/// Cholesky factor of `X*'X*` and the FGLS estimate.
struct NormalEquations {
    lower: DMatrix<f64>,
    beta_hat: DVector<f64>,
}

fn normal_equations(q: &QTransform, z: &[f64], x: &DesignMatrix) -> Result<NormalEquations> {
    let xs = model::transform_design(q, x)?;
    let zs = DVector::from_vec(q.apply(z));
    let xtx = xs.tr_mul(&xs);
    let xtz = xs.tr_mul(&zs);
    let chol = xtx.cholesky().ok_or(Error::SingularDesign)?;
    let beta_hat = chol.solve(&xtz);
    if beta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign);
    }
    Ok(NormalEquations { lower: chol.l(), beta_hat })
}

/// FGLS estimate `(X*'X*)^-1 X*'z*`.
pub fn fgls_beta(rho: &[f64], z: &[f64], x: &DesignMatrix, intercept: InterceptMode) -> Result<Vec<f64>> {
    let q = QTransform::new(rho, intercept)?;
    Ok(normal_equations(&q, z, x)?.beta_hat.iter().copied().collect())
}

/// `beta ~ N(beta_hat, sigma2 (X*'X*)^-1)`.
pub fn draw_beta(
    sigma2: f64,
    rho: &[f64],
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let q = QTransform::new(rho, intercept)?;
    draw_beta_q(&q, sigma2, z, x, rng)
}

fn draw_beta_q(q: &QTransform, sigma2: f64, z: &[f64], x: &DesignMatrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let ne = normal_equations(q, z, x)?;
    // L' v = e gives cov(v) = (L L')^-1
    let e = DVector::from_fn(ne.beta_hat.len(), |_, _| rng.standard_normal());
    let v = ne.lower.tr_solve_upper_triangular(&e).ok_or(Error::SingularDesign)?;
    let sd = sigma2.sqrt();
    Ok(ne.beta_hat.iter().zip(v.iter()).map(|(b, n)| b + sd * n).collect())
}

/// `sigma2 ~ IG(T/2, RSS/2)` with `RSS = |z* - X* beta|^2`.
pub fn draw_sigma2(
    beta: &[f64],
    rho: &[f64],
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<f64> {
    let q = QTransform::new(rho, intercept)?;
    draw_sigma2_q(&q, beta, z, x, rng)
}

fn draw_sigma2_q(q: &QTransform, beta: &[f64], z: &[f64], x: &DesignMatrix, rng: &mut RngStream) -> Result<f64> {
    let rss = residual_sum_of_squares(q, z, x, beta);
    if !(rss > 0.0 && rss.is_finite()) {
        return Err(Error::DegenerateResidual);
    }
    sample_inverse_gamma(0.5 * z.len() as f64, 0.5 * rss, rng)
}

/// Log of the `rho` full conditional up to a constant.
fn log_rho_target(q: &QTransform, beta: &[f64], sigma2: f64, z: &[f64], x: &DesignMatrix) -> f64 {
    q.log_abs_det() - residual_sum_of_squares(q, z, x, beta) / (2.0 * sigma2)
}

/// Metropolis-Hastings accept/reject of `proposal` against `current`.
/// Nonstationary proposals are rejected without evaluating the target.
#[allow(clippy::too_many_arguments)]
pub fn mh_accept(
    beta: &[f64],
    sigma2: f64,
    current: &[f64],
    proposal: &[f64],
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<bool> {
    let q = QTransform::new(current, intercept)?;
    let lp = log_rho_target(&q, beta, sigma2, z, x);
    Ok(mh_accept_q(lp, beta, sigma2, proposal, z, x, intercept, rng)?.is_some())
}

/// Returns the proposal's transform and log target when accepted.
#[allow(clippy::too_many_arguments)]
fn mh_accept_q(
    current_log_target: f64,
    beta: &[f64],
    sigma2: f64,
    proposal: &[f64],
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<Option<(QTransform, f64)>> {
    if !is_stationary(proposal) {
        return Ok(None);
    }
    let q = QTransform::new(proposal, intercept)?;
    let lp = log_rho_target(&q, beta, sigma2, z, x);
    let log_ratio = lp - current_log_target;
    if log_ratio >= 0.0 || rng.open01().ln() < log_ratio {
        Ok(Some((q, lp)))
    } else {
        Ok(None)
    }
}

/// One random-walk MH step for `rho` with proposal `N(rho, step^2 I)`.
#[allow(clippy::too_many_arguments)]
pub fn draw_rho(
    beta: &[f64],
    sigma2: f64,
    rho_current: &[f64],
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
    step: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, bool)> {
    let mut sampler = RhoSampler::new(rho_current, intercept)?;
    let accepted = sampler.step(beta, sigma2, z, x, step, rng)?;
    Ok((sampler.rho().to_vec(), accepted))
}

/// Random-walk MH state for `rho`, caching the current transform.
#[derive(Debug, Clone)]
pub struct RhoSampler {
    q: QTransform,
    intercept: InterceptMode,
}

impl RhoSampler {
    pub fn new(rho: &[f64], intercept: InterceptMode) -> Result<Self> {
        Ok(Self { q: QTransform::new(rho, intercept)?, intercept })
    }

    pub fn rho(&self) -> &[f64] {
        self.q.rho()
    }

    pub fn transform(&self) -> &QTransform {
        &self.q
    }

    /// One MH step targeting `rho | beta, sigma2, z`.
    pub fn step(
        &mut self,
        beta: &[f64],
        sigma2: f64,
        z: &[f64],
        x: &DesignMatrix,
        step: f64,
        rng: &mut RngStream,
    ) -> Result<bool> {
        if self.q.order() == 0 {
            return Ok(true);
        }
        let proposal: Vec<f64> = self.q.rho().iter().map(|r| r + step * rng.standard_normal()).collect();
        let current = log_rho_target(&self.q, beta, sigma2, z, x);
        match mh_accept_q(current, beta, sigma2, &proposal, z, x, self.intercept, rng)? {
            Some((q, _)) => {
                self.q = q;
                Ok(true)
            }
            None => Ok(false),
        }
    }
}

/// Re-imputes censored points in increasing `t`, each as the mean of `m`
/// truncated-normal draws from its one-step conditional given the already
/// updated history. Uncensored points are copied from the data.
pub fn augment_once(
    theta: &ParamDraw,
    z_prev: &[f64],
    x: &DesignMatrix,
    series: &CensoredSeries,
    m: usize,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let q = QTransform::new(&theta.rho, intercept)?;
    let mut z = z_prev.to_vec();
    augment_in_place(&q, theta, &mut z, x, series, m, rng)?;
    Ok(z)
}

fn augment_in_place(
    q: &QTransform,
    theta: &ParamDraw,
    z: &mut [f64],
    x: &DesignMatrix,
    series: &CensoredSeries,
    m: usize,
    rng: &mut RngStream,
) -> Result<()> {
    if m == 0 {
        return Err(Error::ConfigInvalid("augmentation samples m must be positive".into()));
    }
    if z.len() != series.len() || x.rows() != series.len() {
        return Err(Error::LengthMismatch { expected: series.len(), found: z.len() });
    }
    let side = series.direction().truncation_side();
    let limit = series.limit();
    let fit = q.transformed_fit(x, &theta.beta);
    for t in 0..z.len() {
        if !series.censored()[t] {
            z[t] = series.values()[t];
            continue;
        }
        let (mu, var) = conditional_from_parts(q, z, fit[t], t, theta.sigma2);
        let tn = TruncatedNormal::new(mu, var.sqrt(), limit, side)?;
        let sum: f64 = (0..m).map(|_| tn.sample(rng)).sum();
        z[t] = sum / m as f64;
    }
    Ok(())
}

/// Two-pass FGLS starting point: OLS residuals, Yule-Walker `rho` (shrunk
/// into the stationarity region), then GLS for `beta` and `sigma2`.
pub fn initial_estimate(y: &[f64], x: &DesignMatrix, spec: &ModelSpec) -> Result<ParamDraw> {
    let ols = fgls_beta(&[], y, x, spec.intercept)?;
    let resid: Vec<f64> = y.iter().zip(x.fitted(&ols)).map(|(a, b)| a - b).collect();
    let rho = project_stationary(&yule_walker(&resid, spec.order));
    let q = QTransform::new(&rho, spec.intercept)?;
    let beta: Vec<f64> = normal_equations(&q, y, x)?.beta_hat.iter().copied().collect();
    let rss = residual_sum_of_squares(&q, y, x, &beta);
    let sigma2 = (rss / y.len() as f64).max(f64::MIN_POSITIVE);
    ParamDraw::new(beta, rho, sigma2)
}

/// Yule-Walker AR coefficients from sample autocovariances.
pub fn yule_walker(series: &[f64], order: usize) -> Vec<f64> {
    if order == 0 {
        return Vec::new();
    }
    let n = series.len();
    let mean = mean(series);
    let acov: Vec<f64> = (0..=order)
        .map(|h| (0..n.saturating_sub(h)).map(|t| (series[t] - mean) * (series[t + h] - mean)).sum::<f64>() / n as f64)
        .collect();
    if acov[0] <= 0.0 {
        return vec![0.0; order];
    }
    let toeplitz = DMatrix::from_fn(order, order, |i, j| acov[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(order, acov[1..].iter().copied());
    match toeplitz.lu().solve(&rhs) {
        Some(r) if r.iter().all(|v| v.is_finite()) => r.iter().copied().collect(),
        _ => vec![0.0; order],
    }
}

/// Runs GDA-MSM and returns the retained thinned draws after burn-in.
pub fn run_gda_msm(series: &CensoredSeries, x: &DesignMatrix, spec: &ModelSpec, config: &McmcConfig) -> Result<Chain> {
    config.validate()?;
    let len = series.len();
    let k = x.cols();
    let p = spec.order;
    if x.rows() != len {
        return Err(Error::LengthMismatch { expected: len, found: x.rows() });
    }
    if len <= p + k {
        return Err(Error::ConfigInvalid(format!("need T > p + k, got T={len}, p={p}, k={k}")));
    }
    if series.censored_count() == len {
        return Err(Error::ConfigInvalid("every observation is censored".into()));
    }

    let mut rng = RngStream::new(config.seed, config.stream);
    let init = initial_estimate(series.values(), x, spec)?;
    let mut sigma2 = init.sigma2;
    let mut rho_state = RhoSampler::new(&init.rho, spec.intercept)?;
    let mut z = series.values().to_vec();

    let width = k + p + 1;
    let mut draws = Vec::with_capacity(config.retained() * width);
    let mut log_step = config.mh_step_scale.ln();
    let mut accepted_after_burn = 0usize;

    for i in 1..=config.iterations {
        let beta = draw_beta_q(rho_state.transform(), sigma2, &z, x, &mut rng)?;
        sigma2 = draw_sigma2_q(rho_state.transform(), &beta, &z, x, &mut rng)?;
        let accepted = rho_state.step(&beta, sigma2, &z, x, log_step.exp(), &mut rng)?;

        if i <= config.burn_in {
            if config.adapt_during_burn_in && p > 0 {
                let gain = (i as f64).powf(-0.6);
                let a = if accepted { 1.0 } else { 0.0 };
                log_step = (log_step + gain * (a - TARGET_ACCEPTANCE)).clamp(MIN_LOG_STEP, MAX_LOG_STEP);
            }
        } else if accepted {
            accepted_after_burn += 1;
        }

        let theta = ParamDraw { beta, rho: rho_state.rho().to_vec(), sigma2 };
        augment_in_place(rho_state.transform(), &theta, &mut z, x, series, config.augmentation_samples, &mut rng)?;

        if i > config.burn_in && (i - config.burn_in) % config.thin == 0 {
            draws.extend_from_slice(&theta.beta);
            draws.extend_from_slice(rho_state.rho());
            draws.push(sigma2);
        }
    }

    Ok(Chain {
        draws,
        k,
        p,
        augmented: z,
        acceptance_rate: accepted_after_burn as f64 / (config.iterations - config.burn_in) as f64,
        step_scale: log_step.exp(),
        config: config.clone(),
    })
}

/// Per-parameter posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// Batch-means Monte Carlo standard error of `mean`.
    pub mc_se: f64,
    pub skewness: f64,
    /// Shortest interval holding 95% of the draws.
    pub hpd95: [f64; 2],
}

pub fn posterior_summary(chain: &Chain) -> Result<Vec<ParamSummary>> {
    match chain.len() {
        0 => return Err(Error::EmptyChain),
        1 => return Err(Error::ChainTooShort { needed: 2, found: 1 }),
        _ => {}
    }
    Ok(chain
        .parameter_names()
        .into_iter()
        .enumerate()
        .map(|(c, name)| {
            let col = chain.column(c);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let (lo, hi) = hpd_interval(&sorted, 0.95);
            ParamSummary {
                name,
                mean: mean(&col),
                median: quantile_sorted(&sorted, 0.5),
                sd: sample_variance(&col).sqrt(),
                mc_se: crate::diagnostics::mc_standard_error(&col),
                skewness: skewness(&col),
                hpd95: [lo, hi],
            }
        })
        .collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Moment skewness; zero for constant input.
pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Shortest window of `ceil(prob * n)` consecutive sorted draws; ties go to
/// the leftmost window.
pub fn hpd_interval(sorted: &[f64], prob: f64) -> (f64, f64) {
    let n = sorted.len();
    let count = ((prob * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    for i in 1..=n - count {
        if sorted[i + count - 1] - sorted[i] < sorted[best + count - 1] - sorted[best] {
            best = i;
        }
    }
    (sorted[best], sorted[best + count - 1])
}
