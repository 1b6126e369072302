//! Predictive model checking: jackknife one-step residuals, DIC and WAIC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{norm_log_pdf, stream_id, RngStream};
use crate::error::{Error, Result};
use crate::model::{
    complete_log_likelihood_with, conditional_from_parts, is_stationary, project_stationary, CensoredSeries,
    DesignMatrix, InterceptMode, ParamDraw, QTransform,
};
use crate::sampler::{mean, quantile_sorted, run_gda_msm, sample_variance, skewness, Chain, McmcConfig, ModelSpec};
use crate::simstudy::with_jobs;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const PURPOSE_REFIT: u64 = 11;
const PURPOSE_PREDICT: u64 = 12;

/// Predictive variances at or below this (relative to the squared mean)
/// cannot standardize a residual.
const MIN_RELATIVE_VARIANCE: f64 = 1e-12;

/// Sample mean and variance of one simulated `z_t` per retained draw,
/// each from the one-step conditional given `z[..t]` (0-based `t`).
pub fn predictive_moments(
    chain: &Chain,
    z: &[f64],
    x: &DesignMatrix,
    t: usize,
    intercept: InterceptMode,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    match chain.len() {
        0 => return Err(Error::EmptyChain),
        1 => return Err(Error::ChainTooShort { needed: 2, found: 1 }),
        _ => {}
    }
    if t >= x.rows() || t > z.len() {
        return Err(Error::IndexOutOfRange { index: t, context: "predictive moments" });
    }
    let sims = chain
        .draws()
        .map(|theta| {
            let (m, v) = one_step_moments(&theta, z, x, t, intercept)?;
            Ok(m + v.sqrt() * rng.standard_normal())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((mean(&sims), sample_variance(&sims)))
}

fn one_step_moments(
    theta: &ParamDraw,
    z: &[f64],
    x: &DesignMatrix,
    t: usize,
    intercept: InterceptMode,
) -> Result<(f64, f64)> {
    let q = QTransform::new(&theta.rho, intercept)?;
    Ok(conditional_from_parts(&q, z, q.fit_at(x, &theta.beta, t), t, theta.sigma2))
}

/// `(z - mean) / sqrt(var)`, guarding against a collapsed predictive.
pub fn standardized_residual(z: f64, mean: f64, var: f64) -> Result<f64> {
    if !(var.is_finite() && var > MIN_RELATIVE_VARIANCE * mean.abs().max(1.0).powi(2)) {
        return Err(Error::DegenerateVariance(var));
    }
    Ok((z - mean) / var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackknifeOptions {
    /// Size `n` of the initial training window.
    pub training_size: usize,
    /// Refit every `refit_stride` steps, carrying the latest fit forward.
    pub refit_stride: usize,
    /// Chain settings for each refit.
    pub refit: McmcConfig,
    /// Worker threads (0 for the rayon default).
    pub jobs: usize,
}

impl JackknifeOptions {
    pub fn new(training_size: usize) -> Self {
        Self { training_size, refit_stride: 1, refit: McmcConfig::refit(), jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackknifeResiduals {
    /// 1-based time index of each residual, `n+1..=T`.
    pub times: Vec<usize>,
    pub residuals: Vec<f64>,
    pub predictive_means: Vec<f64>,
    pub predictive_variances: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub ssjr: f64,
    pub training_size: usize,
    pub refit_stride: usize,
}

/// Fits the full series for the augmented `z`, then scores every
/// `t = n+1..T` against refits on the censored prefix `y_1..y_{t-1}`.
pub fn jackknife_residuals(
    series: &CensoredSeries,
    x: &DesignMatrix,
    spec: &ModelSpec,
    full: &McmcConfig,
    options: &JackknifeOptions,
) -> Result<JackknifeResiduals> {
    check_training(series.len(), spec.order, options.training_size)?;
    let chain = run_gda_msm(series, x, spec, full)?;
    jackknife_from_augmented(series, x, spec, &chain.augmented, options)
}

/// The refit stage of [`jackknife_residuals`] given the augmented series.
pub fn jackknife_from_augmented(
    series: &CensoredSeries,
    x: &DesignMatrix,
    spec: &ModelSpec,
    z: &[f64],
    options: &JackknifeOptions,
) -> Result<JackknifeResiduals> {
    let len = series.len();
    let n = options.training_size;
    check_training(len, spec.order, n)?;
    if z.len() != len || x.rows() != len {
        return Err(Error::LengthMismatch { expected: len, found: z.len().min(x.rows()) });
    }
    if options.refit_stride == 0 {
        return Err(Error::ConfigInvalid("refit stride must be at least 1".into()));
    }
    options.refit.validate()?;

    let refit_points: Vec<usize> = (n..len).step_by(options.refit_stride).collect();
    let base = &options.refit;
    let blocks = with_jobs(options.jobs, || {
        refit_points
            .par_iter()
            .map(|&start| {
                let config = base.clone().with_seed(base.seed, stream_id(&[base.stream, PURPOSE_REFIT, start as u64]));
                let chain = run_gda_msm(&series.prefix(start)?, &x.row_prefix(start), spec, &config)?;
                let mut rng = RngStream::keyed(base.seed, &[base.stream, PURPOSE_PREDICT, start as u64]);
                let end = (start + options.refit_stride).min(len);
                (start..end)
                    .map(|t| {
                        let (m, v) = predictive_moments(&chain, z, x, t, spec.intercept, &mut rng)?;
                        Ok((t + 1, standardized_residual(z[t], m, v)?, m, v))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let rows: Vec<(usize, f64, f64, f64)> = blocks.into_iter().flatten().collect();
    let residuals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(JackknifeResiduals {
        times: rows.iter().map(|r| r.0).collect(),
        predictive_means: rows.iter().map(|r| r.2).collect(),
        predictive_variances: rows.iter().map(|r| r.3).collect(),
        mean: mean(&residuals),
        variance: if residuals.len() > 1 { sample_variance(&residuals) } else { 0.0 },
        ssjr: residuals.iter().map(|d| d * d).sum(),
        residuals,
        training_size: n,
        refit_stride: options.refit_stride,
    })
}

fn check_training(len: usize, order: usize, n: usize) -> Result<()> {
    if n <= order || n >= len {
        return Err(Error::TrainingTooSmall { n, order, len });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointEstimate {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicResult {
    pub dic: f64,
    /// Posterior mean of the complete-data log-likelihood.
    pub mean_log_likelihood: f64,
    /// Log-likelihood at the plug-in estimate.
    pub plugin_log_likelihood: f64,
    /// Effective number of parameters, `2 (plugin - mean)`.
    pub p_d: f64,
    pub estimate: ParamDraw,
    /// Estimator used for each parameter, in chain column order.
    pub estimators: Vec<PointEstimate>,
    /// Whether the plug-in `rho` had to be shrunk into the stationary region.
    pub projected: bool,
}

/// Per-parameter plug-in estimate: the mean, or the median when
/// `|skewness| > 1`; `rho` is projected into the stationary region.
pub fn point_estimate(chain: &Chain) -> Result<(ParamDraw, Vec<PointEstimate>, bool)> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let (values, estimators): (Vec<f64>, Vec<PointEstimate>) = (0..chain.width())
        .map(|c| {
            let col = chain.column(c);
            if skewness(&col).abs() > 1.0 {
                let mut sorted = col;
                sorted.sort_by(f64::total_cmp);
                (quantile_sorted(&sorted, 0.5), PointEstimate::Median)
            } else {
                (mean(&col), PointEstimate::Mean)
            }
        })
        .unzip();
    let mut theta = ParamDraw::from_slice(&values, chain.regressors(), chain.order());
    let projected = !is_stationary(&theta.rho);
    if projected {
        theta.rho = project_stationary(&theta.rho);
        if !is_stationary(&theta.rho) {
            return Err(Error::NonStationaryMean(
                values[chain.regressors()..chain.regressors() + chain.order()].to_vec(),
            ));
        }
    }
    Ok((theta, estimators, projected))
}

/// `DIC = -4 E[ln f(z | theta)] + 2 ln f(z | theta_hat)`.
pub fn dic(chain: &Chain, z: &[f64], x: &DesignMatrix, intercept: InterceptMode) -> Result<DicResult> {
    let (estimate, estimators, projected) = point_estimate(chain)?;
    let lls = chain
        .draws()
        .map(|theta| complete_log_likelihood_with(&theta, z, x, intercept))
        .collect::<Result<Vec<f64>>>()?;
    let mean_ll = mean(&lls);
    let plugin = complete_log_likelihood_with(&estimate, z, x, intercept)?;
    Ok(DicResult {
        dic: -4.0 * mean_ll + 2.0 * plugin,
        mean_log_likelihood: mean_ll,
        plugin_log_likelihood: plugin,
        p_d: 2.0 * (plugin - mean_ll),
        estimate,
        estimators,
        projected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub waic: f64,
    pub pw: f64,
    /// Log pointwise predictive density, summed over observations.
    pub lppd: f64,
}

/// WAIC from the one-step conditional densities of every observation.
pub fn waic(chain: &Chain, z: &[f64], x: &DesignMatrix, intercept: InterceptMode) -> Result<WaicResult> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let len = z.len();
    if x.rows() != len {
        return Err(Error::LengthMismatch { expected: len, found: x.rows() });
    }
    // log f(z_t | theta_j), stored draw-major.
    let mut ll = Vec::with_capacity(chain.len() * len);
    for theta in chain.draws() {
        let q = QTransform::new(&theta.rho, intercept)?;
        let fit = q.transformed_fit(x, &theta.beta);
        for t in 0..len {
            let (m, v) = conditional_from_parts(&q, z, fit[t], t, theta.sigma2);
            ll.push(norm_log_pdf(z[t], m, v));
        }
    }
    let draws = chain.len();
    let ln_m = (draws as f64).ln();
    let mut lppd = 0.0;
    let mut pw = 0.0;
    for t in 0..len {
        let col = (0..draws).map(|j| ll[j * len + t]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NumericalUnderflow(format!("every draw gives zero density at t = {}", t + 1)));
        }
        let lse = max + col.clone().map(|v| (v - max).exp()).sum::<f64>().ln() - ln_m;
        let avg = col.sum::<f64>() / draws as f64;
        if !avg.is_finite() {
            return Err(Error::NumericalUnderflow(format!("log density is not finite at t = {}", t + 1)));
        }
        lppd += lse;
        pw += 2.0 * (lse - avg);
    }
    Ok(WaicResult { waic: -2.0 * lppd + 2.0 * pw, pw, lppd })
}

/// Everything `assess` reports for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub schema_version: u32,
    pub order: usize,
    pub training_size: usize,
    pub refit_stride: usize,
    pub residual_times: Vec<usize>,
    pub residuals: Vec<f64>,
    pub predictive_means: Vec<f64>,
    pub predictive_variances: Vec<f64>,
    pub residual_mean: f64,
    pub residual_var: f64,
    pub ssjr: f64,
    pub dic: f64,
    pub dic_detail: DicResult,
    pub waic: f64,
    pub pw: f64,
    pub acceptance_rate: f64,
}

/// Full fit, then DIC and WAIC on its augmented series and the jackknife
/// residuals against prefix refits.
pub fn assess(
    series: &CensoredSeries,
    x: &DesignMatrix,
    spec: &ModelSpec,
    full: &McmcConfig,
    options: &JackknifeOptions,
) -> Result<AssessmentReport> {
    check_training(series.len(), spec.order, options.training_size)?;
    let chain = run_gda_msm(series, x, spec, full)?;
    let z = &chain.augmented;
    let dic_detail = dic(&chain, z, x, spec.intercept)?;
    let w = waic(&chain, z, x, spec.intercept)?;
    let jk = jackknife_from_augmented(series, x, spec, z, options)?;
    Ok(AssessmentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        order: spec.order,
        training_size: jk.training_size,
        refit_stride: jk.refit_stride,
        residual_times: jk.times,
        residuals: jk.residuals,
        predictive_means: jk.predictive_means,
        predictive_variances: jk.predictive_variances,
        residual_mean: jk.mean,
        residual_var: jk.variance,
        ssjr: jk.ssjr,
        dic: dic_detail.dic,
        dic_detail,
        waic: w.waic,
        pw: w.pw,
        acceptance_rate: chain.acceptance_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_of(rows: &[Vec<f64>], k: usize, p: usize) -> Chain {
        Chain::from_rows(rows, k, p, Vec::new(), McmcConfig::default()).unwrap()
    }

    fn toy_data() -> (Vec<f64>, DesignMatrix) {
        let mut rng = RngStream::new(3, 0);
        let mut u = 0.0;
        let z: Vec<f64> = (0..60)
            .map(|_| {
                u = 0.5 * u + rng.standard_normal();
                1.0 + u
            })
            .collect();
        (z, DesignMatrix::intercept_only(60))
    }

    #[test]
    fn single_draw_dic_and_waic() {
        let (z, x) = toy_data();
        let chain = chain_of(&[vec![1.0, 0.5, 1.0]], 1, 1);
        let theta = chain.draw(0);
        let ll = complete_log_likelihood_with(&theta, &z, &x, InterceptMode::Transformed).unwrap();
        let d = dic(&chain, &z, &x, InterceptMode::Transformed).unwrap();
        assert_eq!(d.dic, -2.0 * ll);
        let w = waic(&chain, &z, &x, InterceptMode::Transformed).unwrap();
        assert_eq!(w.pw, 0.0);
    }

    #[test]
    fn waic_single_draw_matches_joint() {
        // The one-step densities factorize the joint likelihood.
        let (z, x) = toy_data();
        let chain = chain_of(&[vec![0.7, 0.4, 1.3]], 1, 1);
        let ll = complete_log_likelihood_with(&chain.draw(0), &z, &x, InterceptMode::Transformed).unwrap();
        let w = waic(&chain, &z, &x, InterceptMode::Transformed).unwrap();
        assert!((w.lppd - ll).abs() < 1e-9);
    }

    #[test]
    fn empty_chain_errors() {
        let (z, x) = toy_data();
        let chain = chain_of(&[], 1, 1);
        assert!(matches!(dic(&chain, &z, &x, InterceptMode::Transformed), Err(Error::EmptyChain)));
        assert!(matches!(waic(&chain, &z, &x, InterceptMode::Transformed), Err(Error::EmptyChain)));
        let mut rng = RngStream::new(0, 0);
        assert!(predictive_moments(&chain, &z, &x, 5, InterceptMode::Transformed, &mut rng).is_err());
    }

    #[test]
    fn degenerate_predictive_variance() {
        let (z, x) = toy_data();
        let chain = chain_of(&[vec![1.0, 0.5, 1e-300], vec![1.0, 0.5, 1e-300]], 1, 1);
        let mut rng = RngStream::new(0, 0);
        let (m, v) = predictive_moments(&chain, &z, &x, 10, InterceptMode::Transformed, &mut rng).unwrap();
        assert!((m - (0.5 * z[9] + 0.5)).abs() < 1e-12);
        assert!(matches!(standardized_residual(z[10], m, v), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn skewed_columns_use_median() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let s = if i < 45 { 1.0 } else { 20.0 };
                vec![i as f64, 0.3, s]
            })
            .collect();
        let (theta, est, projected) = point_estimate(&chain_of(&rows, 1, 1)).unwrap();
        assert_eq!(est, vec![PointEstimate::Mean, PointEstimate::Mean, PointEstimate::Median]);
        assert_eq!(theta.sigma2, 1.0);
        assert!(!projected);
    }

    #[test]
    fn training_size_bounds() {
        let series = CensoredSeries::from_latent(&[1.0; 10], 0.0, crate::model::CensorDirection::Left).unwrap();
        let x = DesignMatrix::intercept_only(10);
        let spec = ModelSpec::ar(1);
        for n in [0, 1, 10, 11] {
            let err = jackknife_residuals(&series, &x, &spec, &McmcConfig::refit(), &JackknifeOptions::new(n));
            assert!(matches!(err, Err(Error::TrainingTooSmall { .. })), "n = {n}");
        }
    }
}
