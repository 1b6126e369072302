//! The censored linear regression model with AR(p) errors.
//!
//! The latent series follows `w_t = x_t beta + u_t` with
//! `u_t = rho_1 u_{t-1} + ... + rho_p u_{t-p} + eps_t`, `eps_t ~ N(0, sigma2)`,
//! and only `max(w_t, L)` (left censoring) or `min(w_t, L)` (right
//! censoring) is recorded.
//!
//! The likelihood of a complete (augmented) series is evaluated through a
//! whitening transform `Q` with `sigma2 (Q'Q)^-1 = Sigma_u`. Its first `p`
//! rows are a dense lower-triangular block computed from the stationary
//! autocovariances; every later row is the AR difference
//! `z_t - rho_1 z_{t-1} - ... - rho_p z_{t-p}`. `Q` is never stored as a
//! `T x T` matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::TruncationSide;
use crate::error::{Error, Result};

/// Margin on the companion-matrix spectral radius.
pub const STATIONARITY_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensorDirection {
    /// Values at or below the limit are recorded as the limit.
    Left,
    /// Values at or above the limit are recorded as the limit.
    Right,
}

impl CensorDirection {
    /// Support of a censored latent value.
    pub fn truncation_side(self) -> TruncationSide {
        match self {
            CensorDirection::Left => TruncationSide::UpperBounded,
            CensorDirection::Right => TruncationSide::LowerBounded,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            CensorDirection::Left => CensorDirection::Right,
            CensorDirection::Right => CensorDirection::Left,
        }
    }

    /// Applies the recording rule to a latent value.
    pub fn censor(self, w: f64, limit: f64) -> (f64, bool) {
        match self {
            CensorDirection::Left if w <= limit => (limit, true),
            CensorDirection::Right if w >= limit => (limit, true),
            _ => (w, false),
        }
    }
}

impl std::str::FromStr for CensorDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(CensorDirection::Left),
            "right" => Ok(CensorDirection::Right),
            other => Err(Error::ConfigInvalid(format!("unknown censoring direction `{other}`"))),
        }
    }
}

/// A recorded series with per-point censoring flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSeries {
    values: Vec<f64>,
    censored: Vec<bool>,
    limit: f64,
    direction: CensorDirection,
}

impl CensoredSeries {
    pub fn new(values: Vec<f64>, censored: Vec<bool>, limit: f64, direction: CensorDirection) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData("series is empty".into()));
        }
        if values.len() != censored.len() {
            return Err(Error::LengthMismatch { expected: values.len(), found: censored.len() });
        }
        if !limit.is_finite() {
            return Err(Error::InvalidData(format!("censoring limit must be finite, got {limit}")));
        }
        for (t, (&y, &c)) in values.iter().zip(&censored).enumerate() {
            let ok = match (c, direction) {
                (true, _) => y == limit,
                (false, CensorDirection::Left) => y > limit,
                (false, CensorDirection::Right) => y < limit,
            };
            if !ok || !y.is_finite() {
                return Err(Error::InvalidData(format!(
                    "value {y} at t={} is inconsistent with censored={c}, limit={limit}, direction={direction:?}",
                    t + 1
                )));
            }
        }
        Ok(Self { values, censored, limit, direction })
    }

    /// Censors a latent series at `limit`.
    pub fn from_latent(latent: &[f64], limit: f64, direction: CensorDirection) -> Result<Self> {
        let (values, censored) = latent.iter().map(|&w| direction.censor(w, limit)).unzip();
        Self::new(values, censored, limit, direction)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn censored(&self) -> &[bool] {
        &self.censored
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn direction(&self) -> CensorDirection {
        self.direction
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    /// First `len` observations.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::IndexOutOfRange { index: len, context: "series prefix" });
        }
        Ok(Self {
            values: self.values[..len].to_vec(),
            censored: self.censored[..len].to_vec(),
            limit: self.limit,
            direction: self.direction,
        })
    }

    /// Mirror image: values and limit negated, direction flipped.
    pub fn mirrored(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            censored: self.censored.clone(),
            limit: -self.limit,
            direction: self.direction.flipped(),
        }
    }

    /// Natural log of values and limit.
    pub fn ln(&self) -> Result<Self> {
        if self.limit <= 0.0 || self.values.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidData("log transform needs strictly positive values and limit".into()));
        }
        Self::new(self.values.iter().map(|v| v.ln()).collect(), self.censored.clone(), self.limit.ln(), self.direction)
    }
}

/// Regressors, `T x k`, with an intercept column first.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix(DMatrix<f64>);

impl DesignMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidData("design matrix must be non-empty".into()));
        }
        if matrix.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidData("first design column must be all ones".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design matrix has non-finite entries".into()));
        }
        Ok(Self(matrix))
    }

    pub fn intercept_only(rows: usize) -> Self {
        Self(DMatrix::from_element(rows, 1, 1.0))
    }

    /// Intercept followed by the given covariate columns.
    pub fn with_covariates(rows: usize, covariates: &[Vec<f64>]) -> Result<Self> {
        let mut m = DMatrix::from_element(rows, covariates.len() + 1, 1.0);
        for (j, col) in covariates.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::LengthMismatch { expected: rows, found: col.len() });
            }
            m.column_mut(j + 1).copy_from_slice(col);
        }
        Self::new(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row_prefix(&self, rows: usize) -> Self {
        Self(self.0.rows(0, rows).into_owned())
    }

    /// Column permutation; `order[0]` must stay 0 so the intercept leads.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::new(self.0.select_columns(order))
    }

    /// `X beta` over the non-intercept columns only.
    fn slope_fit(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (j, &b) in beta.iter().enumerate().take(self.cols()).skip(1) {
            for (o, x) in out.iter_mut().zip(self.0.column(j).iter()) {
                *o += x * b;
            }
        }
        out
    }

    /// `X beta`.
    pub fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = self.slope_fit(beta);
        out.iter_mut().for_each(|v| *v += beta[0]);
        out
    }
}

/// One parameter vector `theta = (beta, rho, sigma2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDraw {
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma2: f64,
}

impl ParamDraw {
    pub fn new(beta: Vec<f64>, rho: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::NonPositiveVariance(sigma2));
        }
        if !is_stationary(&rho) {
            return Err(Error::NonStationary(rho));
        }
        Ok(Self { beta, rho, sigma2 })
    }

    /// Flattened as `beta_0..beta_{k-1}, rho_1..rho_p, sigma2`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.extend_from_slice(&self.rho);
        v.push(self.sigma2);
        v
    }

    pub fn from_slice(row: &[f64], k: usize, p: usize) -> Self {
        Self { beta: row[..k].to_vec(), rho: row[k..k + p].to_vec(), sigma2: row[k + p] }
    }
}

/// True iff every root of `1 - rho_1 z - ... - rho_p z^p` lies strictly
/// outside the unit circle, i.e. the companion matrix has spectral radius
/// below `1 - STATIONARITY_MARGIN`.
pub fn is_stationary(rho: &[f64]) -> bool {
    if rho.iter().any(|r| !r.is_finite()) {
        return false;
    }
    spectral_radius(rho) < 1.0 - STATIONARITY_MARGIN
}

fn spectral_radius(rho: &[f64]) -> f64 {
    match rho.len() {
        0 => 0.0,
        1 => rho[0].abs(),
        p => {
            let mut companion = DMatrix::zeros(p, p);
            for (j, &r) in rho.iter().enumerate() {
                companion[(0, j)] = r;
            }
            for i in 1..p {
                companion[(i, i - 1)] = 1.0;
            }
            companion.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
        }
    }
}

/// Shrinks `rho` toward zero until it is stationary.
pub fn project_stationary(rho: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = rho.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    for _ in 0..2000 {
        if is_stationary(&r) {
            return r;
        }
        r.iter_mut().for_each(|v| *v *= 0.95);
    }
    vec![0.0; rho.len()]
}

/// Stationary autocovariances of an AR(p) process with unit innovation
/// variance, and their leading `p x p` Toeplitz block.
#[derive(Debug, Clone, PartialEq)]
pub struct ArCovariance {
    /// `gamma_0 .. gamma_{p-1}`.
    pub gamma: Vec<f64>,
    pub sigma_p: DMatrix<f64>,
}

/// Solves the Yule-Walker system for `gamma_0 .. gamma_max_lag`.
pub fn autocovariances(rho: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if !is_stationary(rho) {
        return Err(Error::NonStationary(rho.to_vec()));
    }
    let p = rho.len();
    let n = p + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for h in 0..n {
        a[(h, h)] += 1.0;
        for (i, &r) in rho.iter().enumerate() {
            let lag = (h as isize - (i as isize + 1)).unsigned_abs();
            a[(h, lag)] -= r;
        }
    }
    let mut rhs = DVector::zeros(n);
    rhs[0] = 1.0;
    let solved = a.lu().solve(&rhs).ok_or_else(|| Error::NonStationary(rho.to_vec()))?;
    let mut gamma: Vec<f64> = solved.iter().copied().collect();
    while gamma.len() <= max_lag {
        let h = gamma.len();
        gamma.push(rho.iter().enumerate().map(|(i, r)| r * gamma[h - i - 1]).sum());
    }
    gamma.truncate(max_lag + 1);
    Ok(gamma)
}

pub fn ar_autocovariance(rho: &[f64]) -> Result<ArCovariance> {
    let p = rho.len();
    let mut gamma = autocovariances(rho, p)?;
    gamma.truncate(p);
    let sigma_p = DMatrix::from_fn(p, p, |i, j| gamma[i.abs_diff(j)]);
    Ok(ArCovariance { gamma, sigma_p })
}

/// How the intercept column enters the transformed design.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterceptMode {
    /// The intercept column is transformed like any other, so `X* = Q X`
    /// exactly and the process mean is `x_t beta`.
    #[default]
    Transformed,
    /// The intercept column of `X*` is held at one. This is an
    /// ARX-style parametrization: the stationary mean of an intercept-only
    /// model becomes `beta_0 / (1 - rho_1 - ... - rho_p)`.
    Unit,
}

impl std::str::FromStr for InterceptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transformed" => Ok(InterceptMode::Transformed),
            "unit" => Ok(InterceptMode::Unit),
            other => Err(Error::ConfigInvalid(format!("unknown intercept mode `{other}` (transformed or unit)"))),
        }
    }
}

/// The whitening transform for a given `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTransform {
    rho: Vec<f64>,
    /// `p x p` lower-triangular block with positive diagonal.
    head: DMatrix<f64>,
    log_abs_det: f64,
    intercept: InterceptMode,
}

/// Builds `Q` with the exact intercept transform.
pub fn build_q(rho: &[f64]) -> Result<QTransform> {
    QTransform::new(rho, InterceptMode::Transformed)
}

impl QTransform {
    /// The head block is `L^-1` for the Cholesky factor `L L' = Gamma_p`,
    /// which gives `head' head = Gamma_p^-1` and keeps row `t` of the head
    /// dependent only on `z_1..z_t`.
    pub fn new(rho: &[f64], intercept: InterceptMode) -> Result<Self> {
        let cov = ar_autocovariance(rho)?;
        let p = rho.len();
        let head = if p == 0 {
            DMatrix::zeros(0, 0)
        } else {
            let chol = cov.sigma_p.cholesky().ok_or_else(|| Error::NonStationary(rho.to_vec()))?;
            let l = chol.l();
            l.solve_lower_triangular(&DMatrix::identity(p, p)).ok_or_else(|| Error::NonStationary(rho.to_vec()))?
        };
        let log_abs_det = head.diagonal().iter().map(|d| d.ln()).sum();
        Ok(Self { rho: rho.to_vec(), head, log_abs_det, intercept })
    }

    pub fn order(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn head(&self) -> &DMatrix<f64> {
        &self.head
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn intercept(&self) -> InterceptMode {
        self.intercept
    }

    /// Diagonal entry `Q_tt` (0-based `t`).
    pub fn diag(&self, t: usize) -> f64 {
        if t < self.order() {
            self.head[(t, t)]
        } else {
            1.0
        }
    }

    /// `sum_{s<t} Q_ts z_s` (0-based `t`), the off-diagonal part of row `t`.
    pub fn lower_dot(&self, t: usize, z: &[f64]) -> f64 {
        let p = self.order();
        if t < p {
            (0..t).map(|s| self.head[(t, s)] * z[s]).sum()
        } else {
            -self.rho.iter().enumerate().map(|(i, r)| r * z[t - i - 1]).sum::<f64>()
        }
    }

    /// Row `t` of `X* beta`, in `O(p k)`.
    pub fn fit_at(&self, x: &DesignMatrix, beta: &[f64], t: usize) -> f64 {
        let m = x.matrix();
        let slope = |s: usize| (1..m.ncols()).map(|c| m[(s, c)] * beta[c]).sum::<f64>();
        let p = self.order();
        let (lower, lower_ones) = if t < p {
            ((0..t).map(|s| self.head[(t, s)] * slope(s)).sum::<f64>(), (0..t).map(|s| self.head[(t, s)]).sum::<f64>())
        } else {
            (
                -self.rho.iter().enumerate().map(|(i, r)| r * slope(t - i - 1)).sum::<f64>(),
                -self.rho.iter().sum::<f64>(),
            )
        };
        let intercept = match self.intercept {
            InterceptMode::Transformed => self.diag(t) + lower_ones,
            InterceptMode::Unit => 1.0,
        };
        self.diag(t) * slope(t) + lower + beta[0] * intercept
    }

    /// `(Q z)_t`.
    pub fn apply_at(&self, t: usize, z: &[f64]) -> f64 {
        self.diag(t) * z[t] + self.lower_dot(t, z)
    }

    /// `Q z` written into `out`.
    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        for (t, o) in out.iter_mut().enumerate().take(z.len()) {
            *o = self.apply_at(t, z);
        }
    }

    /// `Q z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.apply_into(z, &mut out);
        out
    }

    /// Transformed intercept column.
    pub fn intercept_column(&self, len: usize) -> Vec<f64> {
        match self.intercept {
            InterceptMode::Transformed => self.apply(&vec![1.0; len]),
            InterceptMode::Unit => vec![1.0; len],
        }
    }

    /// `X* beta` without materializing `X*`.
    pub fn transformed_fit(&self, x: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
        let mut out = self.apply(&x.slope_fit(beta));
        for (o, c) in out.iter_mut().zip(self.intercept_column(x.rows())) {
            *o += beta[0] * c;
        }
        out
    }
}

fn check_len(q: &QTransform, len: usize) -> Result<()> {
    if len < q.order() || len == 0 {
        return Err(Error::LengthMismatch { expected: q.order().max(1), found: len });
    }
    Ok(())
}

/// `z* = Q z`, in `O(T p)`.
pub fn transform_series(q: &QTransform, z: &[f64]) -> Result<Vec<f64>> {
    check_len(q, z.len())?;
    Ok(q.apply(z))
}

/// `X* = Q X` column by column, intercept per `q.intercept()`.
pub fn transform_design(q: &QTransform, x: &DesignMatrix) -> Result<DMatrix<f64>> {
    check_len(q, x.rows())?;
    let mut out = DMatrix::zeros(x.rows(), x.cols());
    out.column_mut(0).copy_from_slice(&q.intercept_column(x.rows()));
    let mut col = vec![0.0; x.rows()];
    for j in 1..x.cols() {
        let src: Vec<f64> = x.matrix().column(j).iter().copied().collect();
        q.apply_into(&src, &mut col);
        out.column_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

/// Log of the complete-data likelihood
/// `|Q| (2 pi sigma2)^(-T/2) exp(-|z* - X* beta|^2 / (2 sigma2))`.
pub fn complete_log_likelihood(theta: &ParamDraw, z: &[f64], x: &DesignMatrix) -> Result<f64> {
    complete_log_likelihood_with(theta, z, x, InterceptMode::Transformed)
}

pub fn complete_log_likelihood_with(
    theta: &ParamDraw,
    z: &[f64],
    x: &DesignMatrix,
    intercept: InterceptMode,
) -> Result<f64> {
    if !(theta.sigma2 > 0.0 && theta.sigma2.is_finite()) {
        return Err(Error::NonPositiveVariance(theta.sigma2));
    }
    if z.len() != x.rows() {
        return Err(Error::LengthMismatch { expected: x.rows(), found: z.len() });
    }
    if theta.beta.len() != x.cols() {
        return Err(Error::LengthMismatch { expected: x.cols(), found: theta.beta.len() });
    }
    let q = QTransform::new(&theta.rho, intercept)?;
    check_len(&q, z.len())?;
    let rss = residual_sum_of_squares(&q, z, x, &theta.beta);
    Ok(log_likelihood_from_rss(&q, rss, z.len(), theta.sigma2))
}

pub(crate) fn residual_sum_of_squares(q: &QTransform, z: &[f64], x: &DesignMatrix, beta: &[f64]) -> f64 {
    let fit = q.transformed_fit(x, beta);
    (0..z.len())
        .map(|t| {
            let e = q.apply_at(t, z) - fit[t];
            e * e
        })
        .sum()
}

pub(crate) fn log_likelihood_from_rss(q: &QTransform, rss: f64, len: usize, sigma2: f64) -> f64 {
    q.log_abs_det() - 0.5 * len as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() - rss / (2.0 * sigma2)
}

/// Mean and variance of `z_t` given `z_1..z_{t-1}` (0-based `t`).
///
/// For `t >= p` this is the AR one-step conditional
/// `rho_1 z_{t-1} + ... + rho_p z_{t-p} + x*_t beta` with variance `sigma2`.
/// Inside the leading block it is the exact Gaussian conditional implied by
/// the stationary covariance, falling back to the marginal at `t = 0`.
pub fn conditional_moments(
    theta: &ParamDraw,
    z: &[f64],
    x: &DesignMatrix,
    t: usize,
    intercept: InterceptMode,
) -> Result<(f64, f64)> {
    if t >= z.len() || t >= x.rows() {
        return Err(Error::IndexOutOfRange { index: t, context: "conditional moments" });
    }
    let q = QTransform::new(&theta.rho, intercept)?;
    let fit = q.transformed_fit(&x.row_prefix(t + 1), &theta.beta);
    Ok(conditional_from_parts(&q, z, fit[t], t, theta.sigma2))
}

/// Conditional mean of `z_t` (0-based `t`) under the exact intercept transform.
pub fn conditional_mean(theta: &ParamDraw, z: &[f64], x: &DesignMatrix, t: usize) -> Result<f64> {
    conditional_moments(theta, z, x, t, InterceptMode::Transformed).map(|(m, _)| m)
}

/// Solves row `t` of `z* = X* beta + eps` for `z_t`.
pub(crate) fn conditional_from_parts(q: &QTransform, z: &[f64], fit_t: f64, t: usize, sigma2: f64) -> (f64, f64) {
    let d = q.diag(t);
    ((fit_t - q.lower_dot(t, z)) / d, sigma2 / (d * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationarity_examples() {
        assert!(is_stationary(&[0.48]));
        assert!(is_stationary(&[0.0]));
        assert!(is_stationary(&[]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[0.5, 0.5]));
        assert!(!is_stationary(&[0.6, 0.5]));
        assert!(is_stationary(&[0.697, 0.160]));
        assert!(!is_stationary(&[f64::NAN]));
    }

    #[test]
    fn ar1_autocovariance() {
        let c = ar_autocovariance(&[0.6]).unwrap();
        assert_abs_diff_eq!(c.gamma[0], 1.0 / (1.0 - 0.36), epsilon = 1e-14);
        assert_eq!(ar_autocovariance(&[0.0]).unwrap().gamma, vec![1.0]);
        assert!(matches!(ar_autocovariance(&[1.2]), Err(Error::NonStationary(_))));
    }

    #[test]
    fn ar2_autocovariance_closed_form() {
        // gamma_0 = (1 - r2) / ((1 + r2)((1 - r2)^2 - r1^2)) for unit innovations
        let (r1, r2) = (0.697, 0.160);
        let g = autocovariances(&[r1, r2], 2).unwrap();
        let g0 = (1.0 - r2) / ((1.0 + r2) * ((1.0 - r2).powi(2) - r1 * r1));
        assert_abs_diff_eq!(g[0], g0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], r1 * g0 / (1.0 - r2), epsilon = 1e-12);
    }

    #[test]
    fn q_head_examples() {
        let q = build_q(&[0.8]).unwrap();
        assert_abs_diff_eq!(q.head()[(0, 0)], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(q.log_abs_det(), 0.6f64.ln(), epsilon = 1e-14);
        let id = build_q(&[0.0]).unwrap();
        assert_eq!(id.head()[(0, 0)], 1.0);
        assert!(build_q(&[-1.0]).is_err());
    }

    #[test]
    fn transform_series_examples() {
        let q = build_q(&[0.8]).unwrap();
        let zs = transform_series(&q, &[1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(zs[0], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(zs[1], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(zs[2], 0.2, epsilon = 1e-14);
        let z = [0.3, -1.2, 2.0, 0.5];
        assert_eq!(transform_series(&build_q(&[0.0]).unwrap(), &z).unwrap(), z.to_vec());
        assert!(matches!(
            transform_series(&build_q(&[0.1, 0.2, 0.1]).unwrap(), &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unit_intercept_stays_one() {
        let q = QTransform::new(&[0.5, 0.2], InterceptMode::Unit).unwrap();
        let x = DesignMatrix::intercept_only(7);
        let xs = transform_design(&q, &x).unwrap();
        assert!(xs.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_rho_is_identity_on_design() {
        let x = DesignMatrix::with_covariates(4, &[vec![1.0, -2.0, 0.5, 3.0]]).unwrap();
        let xs = transform_design(&build_q(&[0.0]).unwrap(), &x).unwrap();
        assert_eq!(&xs, x.matrix());
    }

    #[test]
    fn conditional_mean_hand_example() {
        let theta = ParamDraw::new(vec![2.0], vec![0.8], 1.0).unwrap();
        let x = DesignMatrix::intercept_only(3);
        let z = [0.0, 3.0, 0.0];
        assert_abs_diff_eq!(conditional_mean(&theta, &z, &x, 2).unwrap(), 2.8, epsilon = 1e-14);
        // t = 0 falls back to the stationary marginal
        let (m, v) = conditional_moments(&theta, &z, &x, 0, InterceptMode::Transformed).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 1.0 / 0.36, epsilon = 1e-12);
        assert!(conditional_mean(&theta, &z, &x, 3).is_err());
    }

    #[test]
    fn conditional_mean_without_ar_is_fit() {
        let theta = ParamDraw::new(vec![1.0, -0.5], vec![0.0], 2.0).unwrap();
        let x = DesignMatrix::with_covariates(3, &[vec![2.0, 4.0, 6.0]]).unwrap();
        let z = [9.0, 9.0, 9.0];
        assert_abs_diff_eq!(conditional_mean(&theta, &z, &x, 2).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn iid_likelihood() {
        let theta = ParamDraw::new(vec![0.0], vec![0.0], 1.0).unwrap();
        let z = [0.1, -0.4, 1.3];
        let x = DesignMatrix::intercept_only(3);
        let expected: f64 = z.iter().map(|v| -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * v * v).sum();
        assert_abs_diff_eq!(complete_log_likelihood(&theta, &z, &x).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn likelihood_errors() {
        let x = DesignMatrix::intercept_only(3);
        let bad = ParamDraw { beta: vec![0.0], rho: vec![0.0], sigma2: 0.0 };
        assert!(matches!(complete_log_likelihood(&bad, &[0.0; 3], &x), Err(Error::NonPositiveVariance(_))));
        let bad = ParamDraw { beta: vec![0.0], rho: vec![1.5], sigma2: 1.0 };
        assert!(matches!(complete_log_likelihood(&bad, &[0.0; 3], &x), Err(Error::NonStationary(_))));
    }

    #[test]
    fn series_validation() {
        use CensorDirection::*;
        assert!(CensoredSeries::new(vec![1.0, 0.0], vec![false, true], 0.0, Left).is_ok());
        assert!(CensoredSeries::new(vec![-1.0, 0.0], vec![false, true], 0.0, Left).is_err());
        assert!(CensoredSeries::new(vec![-1.0, 0.0], vec![false, true], 0.0, Right).is_ok());
        assert!(CensoredSeries::new(vec![1.0], vec![false, true], 0.0, Left).is_err());
        assert!(CensoredSeries::new(vec![], vec![], 0.0, Left).is_err());
        let s = CensoredSeries::from_latent(&[-2.0, 1.0, 0.0], 0.0, Left).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.censored_count(), 2);
        let m = s.mirrored();
        assert_eq!(m.direction(), Right);
        assert_eq!(m.values()[1], -1.0);
    }

    #[test]
    fn design_validation() {
        assert!(DesignMatrix::new(DMatrix::from_element(3, 1, 2.0)).is_err());
        assert!(DesignMatrix::with_covariates(3, &[vec![1.0, 2.0]]).is_err());
        let x = DesignMatrix::with_covariates(2, &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(x.fitted(&[1.0, 2.0]), vec![3.0, 5.0]);
    }

    #[test]
    fn projection_lands_in_region() {
        let r = project_stationary(&[0.9, 0.5]);
        assert!(is_stationary(&r));
        assert_eq!(project_stationary(&[0.3]), vec![0.3]);
    }

    #[test]
    fn fit_at_matches_full_fit() {
        let x = DesignMatrix::with_covariates(9, &[vec![0.3, -1.2, 0.8, 2.0, -0.4, 1.1, 0.0, -2.2, 0.6]]).unwrap();
        let beta = [1.5, -0.7];
        for mode in [InterceptMode::Transformed, InterceptMode::Unit] {
            let q = QTransform::new(&[0.5, -0.3, 0.1], mode).unwrap();
            let full = q.transformed_fit(&x, &beta);
            for (t, f) in full.iter().enumerate() {
                assert_abs_diff_eq!(q.fit_at(&x, &beta, t), *f, epsilon = 1e-12);
            }
        }
    }
}
