//! Seeded random streams and the handful of distributions the sampler needs.
//!
//! Every stochastic routine in the crate draws from an [`RngStream`], a
//! ChaCha20 generator addressed by a `(seed, stream)` pair. Independent
//! streams for replications, refits and covariates are derived with
//! [`RngStream::keyed`], so results never depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Below this truncated mass the inverse-CDF method loses precision and the
/// exponential-rejection tail sampler takes over.
const INVERSE_CDF_MIN_MASS: f64 = 1e-10;

/// A reproducible random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream whose id is a stable hash of `key`.
    pub fn keyed(seed: u64, key: &[u64]) -> Self {
        Self::new(seed, stream_id(key))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable across platforms and compiler versions, unlike `std::hash`.
pub fn stream_id(key: &[u64]) -> u64 {
    key.iter().fold(0x9e37_79b9_7f4a_7c15_u64, |acc, &k| mix64(acc.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ mix64(k)))
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, `p` in (0, 1): Acklam's rational
/// approximation polished by one Halley step.
pub fn norm_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996e0, 3.754408661907416e0];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    // Halley refinement; the residual is computed on the smaller tail.
    let e = if x < 0.0 { norm_cdf(x) - p } else { (1.0 - p) - norm_cdf(-x) };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Log-density of `N(mean, variance)` at `x`.
pub fn norm_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * variance).ln() + d * d / variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TruncationSide {
    /// Support `(-inf, bound]`.
    UpperBounded,
    /// Support `[bound, inf)`.
    LowerBounded,
}

/// Normal distribution restricted to one side of `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub bound: f64,
    pub side: TruncationSide,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, bound: f64, side: TruncationSide) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !mu.is_finite() || !bound.is_finite() {
            return Err(Error::InvalidSpec(format!("mu ({mu}) and bound ({bound}) must be finite")));
        }
        Ok(Self { mu, sigma, bound, side })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self.side {
            TruncationSide::UpperBounded => sample_upper(self.mu, self.sigma, self.bound, rng),
            TruncationSide::LowerBounded => -sample_upper(-self.mu, self.sigma, -self.bound, rng),
        }
    }
}

/// One draw from `N(mu, sigma^2)` conditioned on `x <= bound`.
fn sample_upper(mu: f64, sigma: f64, bound: f64, rng: &mut RngStream) -> f64 {
    let alpha = (bound - mu) / sigma;
    let mass = norm_cdf(alpha);
    let x = if mass >= INVERSE_CDF_MIN_MASS {
        norm_quantile(rng.open01() * mass).min(alpha)
    } else {
        -sample_lower_tail(-alpha, rng)
    };
    (mu + sigma * x).min(bound)
}

/// Standard normal conditioned on `x >= a` for large positive `a`, by
/// rejection from a translated exponential with the optimal rate.
fn sample_lower_tail(a: f64, rng: &mut RngStream) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(lambda).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let d = z - lambda;
        if rng.open01() <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Draw with density proportional to `x^(-shape-1) exp(-rate/x)`.
pub fn sample_inverse_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "inverse gamma needs positive finite shape and rate, got shape={shape}, rate={rate}"
        )));
    }
    let gamma =
        Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidSpec(format!("gamma({shape}, 1/{rate}): {e}")))?;
    Ok(1.0 / gamma.sample(rng))
}

/// Multivariate normal draw through the Cholesky factor of `covariance`.
pub fn sample_multivariate_normal(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
        return Err(Error::LengthMismatch { expected: mean.len(), found: covariance.nrows() });
    }
    let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(sample_mvn_with_factor(mean, &chol.l(), rng))
}

/// `mean + L e` with `e` iid standard normal and `L` lower triangular.
pub(crate) fn sample_mvn_with_factor(mean: &DVector<f64>, lower: &DMatrix<f64>, rng: &mut RngStream) -> DVector<f64> {
    let e = DVector::from_fn(mean.len(), |_, _| rng.standard_normal());
    mean + lower * e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        // erf-table value of Phi(-1.96)
        assert!((norm_cdf(-1.96) - 0.024_997_895_148_220_43).abs() < 1e-12);
        assert!((norm_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-20);
    }

    #[test]
    fn cdf_is_monotone_on_grid() {
        let mut prev = 0.0;
        for i in 0..=16_000 {
            let x = -8.0 + i as f64 * 1e-3;
            let c = norm_cdf(x);
            assert!(c >= prev, "not monotone at {x}");
            prev = c;
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-14, 1e-10, 1e-4, 0.025, 0.3, 0.5, 0.9, 0.999] {
            let x = norm_quantile(p);
            assert!((norm_cdf(x) / p - 1.0).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn same_key_same_sequence() {
        let mut a = RngStream::keyed(7, &[1, 2, 3]);
        let mut b = RngStream::keyed(7, &[1, 2, 3]);
        let mut c = RngStream::keyed(7, &[1, 2, 4]);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TruncatedNormal::new(0.0, 0.0, 1.0, TruncationSide::UpperBounded).is_err());
        assert!(TruncatedNormal::new(0.0, 1.0, f64::NAN, TruncationSide::UpperBounded).is_err());
        let mut rng = RngStream::new(1, 0);
        assert!(sample_inverse_gamma(2.0, 0.0, &mut rng).is_err());
        assert!(sample_inverse_gamma(0.0, 1.0, &mut rng).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_multivariate_normal(&DVector::zeros(2), &bad, &mut rng),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn deep_tail_stays_in_support() {
        let mut rng = RngStream::new(3, 0);
        let tn = TruncatedNormal::new(5.0, 2.0, -3.0, TruncationSide::UpperBounded).unwrap();
        for _ in 0..10_000 {
            let x = tn.sample(&mut rng);
            assert!(x.is_finite() && x <= -3.0);
        }
        let tn = TruncatedNormal::new(-5.0, 2.0, 3.0, TruncationSide::LowerBounded).unwrap();
        for _ in 0..10_000 {
            assert!(tn.sample(&mut rng) >= 3.0);
        }
    }

    #[test]
    fn lower_bounded_is_mirror_of_upper() {
        let up = TruncatedNormal::new(1.0, 1.5, 0.3, TruncationSide::UpperBounded).unwrap();
        let lo = TruncatedNormal::new(-1.0, 1.5, -0.3, TruncationSide::LowerBounded).unwrap();
        let mut a = RngStream::new(11, 5);
        let mut b = RngStream::new(11, 5);
        for _ in 0..100 {
            assert_eq!(up.sample(&mut a), -lo.sample(&mut b));
        }
    }
}
