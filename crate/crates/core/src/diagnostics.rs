//! Convergence and mixing checks on retained chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{mean, quantile_sorted, sample_variance, Chain};

/// Minimum chain length accepted by [`geweke`].
pub const GEWEKE_MIN_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub parameters: Vec<String>,
    pub z_scores: Vec<f64>,
    pub window_early: f64,
    pub window_late: f64,
}

/// Geweke z-score for every chain column.
pub fn geweke(chain: &Chain, early: f64, late: f64) -> Result<GewekeResult> {
    let z_scores =
        (0..chain.width()).map(|c| geweke_series(&chain.column(c), early, late)).collect::<Result<Vec<_>>>()?;
    Ok(GewekeResult { parameters: chain.parameter_names(), z_scores, window_early: early, window_late: late })
}

/// Compares the mean of the first `early` fraction with the mean of the
/// last `late` fraction, each standardized by a batch-means estimate of
/// the spectral density at zero.
pub fn geweke_series(xs: &[f64], early: f64, late: f64) -> Result<f64> {
    if xs.len() < GEWEKE_MIN_LEN {
        return Err(Error::ChainTooShort { needed: GEWEKE_MIN_LEN, found: xs.len() });
    }
    if !(early > 0.0 && late > 0.0 && early + late <= 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "Geweke windows must be positive and disjoint, got {early} and {late}"
        )));
    }
    let n = xs.len();
    let n_early = ((early * n as f64).floor() as usize).max(2);
    let n_late = ((late * n as f64).floor() as usize).max(2);
    let a = &xs[..n_early];
    let b = &xs[n - n_late..];
    let diff = mean(a) - mean(b);
    let se2 = batch_means_variance(a) + batch_means_variance(b);
    if se2 > 0.0 {
        Ok(diff / se2.sqrt())
    } else if diff == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::DegenerateVariance(se2))
    }
}

/// Variance of the sample mean from `ceil(sqrt(n))` non-overlapping batches.
pub fn batch_means_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    let batches = (n as f64).sqrt().ceil() as usize;
    let size = n / batches;
    if batches < 2 || size == 0 {
        return sample_variance(xs) / n as f64;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    sample_variance(&means) / means.len() as f64
}

/// Monte Carlo standard error of the mean of `xs`.
pub fn mc_standard_error(xs: &[f64]) -> f64 {
    batch_means_variance(xs).sqrt()
}

/// Sample autocorrelations at lags `0..=max_lag`, normalized by `n`.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if xs.len() < 2 || max_lag >= xs.len() {
        return Err(Error::ChainTooShort { needed: (max_lag + 1).max(2), found: xs.len() });
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    let mut out = vec![0.0; max_lag + 1];
    out[0] = 1.0;
    if c0 == 0.0 {
        return Ok(out);
    }
    for (h, slot) in out.iter_mut().enumerate().skip(1) {
        let ch: f64 = dev[..dev.len() - h].iter().zip(&dev[h..]).map(|(a, b)| a * b).sum();
        *slot = (ch / c0).clamp(-1.0, 1.0);
    }
    Ok(out)
}

/// Autocorrelations of every chain column.
pub fn chain_acf(chain: &Chain, max_lag: usize) -> Result<Vec<Vec<f64>>> {
    (0..chain.width()).map(|c| acf(&chain.column(c), max_lag)).collect()
}

/// Quantiles of each prefix `xs[..=i]`; row `i` holds one value per prob.
pub fn running_quantiles(xs: &[f64], probs: &[f64]) -> Result<Vec<Vec<f64>>> {
    if xs.is_empty() {
        return Err(Error::EmptyChain);
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::ConfigInvalid(format!("quantile probability {p} outside [0, 1]")));
    }
    let mut sorted: Vec<f64> = Vec::with_capacity(xs.len());
    Ok(xs
        .iter()
        .map(|&x| {
            let at = sorted.partition_point(|v| v.total_cmp(&x).is_lt());
            sorted.insert(at, x);
            probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
        })
        .collect())
}
