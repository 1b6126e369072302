//! Dense reference computations shared by the test targets.
//!
//! Nothing here calls the library's covariance or transform code: the
//! autocovariances come from the MA(infinity) weights and every Gaussian
//! quantity from dense Cholesky algebra.
#![allow(dead_code)]

use clrar_core::distributions::{
    sample_inverse_gamma, sample_multivariate_normal, RngStream, TruncatedNormal, TruncationSide,
};
use clrar_core::model::{complete_log_likelihood, DesignMatrix, InterceptMode, ParamDraw, QTransform};
use clrar_core::sampler::draw_rho;
use nalgebra::{DMatrix, DVector};

/// Expands `prod_i (1 - r_i B)` into AR coefficients.
pub fn rho_from_roots(roots: &[(f64, f64)]) -> Vec<f64> {
    // Polynomial in B with complex coefficients, constant term first.
    let mut poly: Vec<(f64, f64)> = vec![(1.0, 0.0)];
    for &(re, im) in roots {
        let mut next = vec![(0.0, 0.0); poly.len() + 1];
        for (i, &(a, b)) in poly.iter().enumerate() {
            next[i].0 += a;
            next[i].1 += b;
            next[i + 1].0 -= a * re - b * im;
            next[i + 1].1 -= a * im + b * re;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c.0).collect()
}

/// Random stationary AR(p) coefficients with inverse roots of modulus
/// at most `max_modulus`.
pub fn random_stationary_rho(p: usize, max_modulus: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut roots = Vec::new();
    while roots.len() < p {
        let r = max_modulus * rng.open01();
        if p - roots.len() >= 2 && rng.open01() < 0.5 {
            let angle = std::f64::consts::PI * rng.open01();
            roots.push((r * angle.cos(), r * angle.sin()));
            roots.push((r * angle.cos(), -r * angle.sin()));
        } else {
            let sign = if rng.open01() < 0.5 { -1.0 } else { 1.0 };
            roots.push((sign * r, 0.0));
        }
    }
    rho_from_roots(&roots)
}

/// `gamma_h = sigma2 sum_j psi_j psi_{j+h}` from the MA(infinity) weights.
pub fn psi_autocovariances(rho: &[f64], sigma2: f64, max_lag: usize) -> Vec<f64> {
    const TERMS: usize = 6000;
    let mut psi = vec![0.0; TERMS + max_lag];
    psi[0] = 1.0;
    for j in 1..psi.len() {
        psi[j] = rho.iter().enumerate().filter(|(i, _)| *i < j).map(|(i, r)| r * psi[j - i - 1]).sum();
    }
    (0..=max_lag).map(|h| sigma2 * (0..TERMS).map(|j| psi[j] * psi[j + h]).sum::<f64>()).collect()
}

/// Stationary covariance matrix of `T` consecutive AR values.
pub fn dense_sigma(rho: &[f64], sigma2: f64, len: usize) -> DMatrix<f64> {
    let g = psi_autocovariances(rho, sigma2, len);
    DMatrix::from_fn(len, len, |i, j| g[i.abs_diff(j)])
}

/// `Q` materialized column by column from the streaming transform.
pub fn dense_q(q: &QTransform, len: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(len, len);
    for s in 0..len {
        let mut e = vec![0.0; len];
        e[s] = 1.0;
        let col = q.apply(&e);
        out.column_mut(s).copy_from_slice(&col);
    }
    out
}

pub fn dense_log_density(z: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let n = z.len();
    let chol = cov.clone().cholesky().expect("covariance must be positive definite");
    let r = DVector::from_iterator(n, z.iter().zip(mean).map(|(a, b)| a - b));
    let w = chol.l().solve_lower_triangular(&r).unwrap();
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + w.norm_squared())
}

/// `E[z_t | z_0..z_{t-1}]` and its variance from the joint Gaussian.
pub fn dense_conditional(z: &[f64], mean: &[f64], cov: &DMatrix<f64>, t: usize) -> (f64, f64) {
    if t == 0 {
        return (mean[0], cov[(0, 0)]);
    }
    let s_pp = cov.view((0, 0), (t, t)).clone_owned();
    let s_tp = cov.view((t, 0), (1, t)).clone_owned();
    let dev = DVector::from_iterator(t, (0..t).map(|s| z[s] - mean[s]));
    let chol = s_pp.cholesky().unwrap();
    let w = chol.solve(&dev);
    let m = mean[t] + (&s_tp * w)[0];
    let v = cov[(t, t)] - (&s_tp * chol.solve(&s_tp.transpose()))[(0, 0)];
    (m, v)
}

/// Largest `|sigma2 (Q'Q)^-1 - Sigma_u|`, scaled by `max(1, |Sigma_u|)`.
pub fn q_identity_max_error(instances: usize, len: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, 1);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let p = 1 + i % 3;
        let rho = random_stationary_rho(p, 0.9, &mut rng);
        let sigma2 = 0.2 + 3.0 * rng.open01();
        let q = QTransform::new(&rho, InterceptMode::Transformed).unwrap();
        let dq = dense_q(&q, len);
        let implied = (dq.transpose() * &dq).try_inverse().unwrap() * sigma2;
        let truth = dense_sigma(&rho, sigma2, len);
        for (a, b) in implied.iter().zip(truth.iter()) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

pub fn random_design(len: usize, k: usize, rng: &mut RngStream) -> DesignMatrix {
    let cols: Vec<Vec<f64>> = (1..k).map(|_| (0..len).map(|_| rng.standard_normal()).collect()).collect();
    DesignMatrix::with_covariates(len, &cols).unwrap()
}

/// Random `(theta, z, X)` with `z` drawn near the model.
pub fn random_instance(len: usize, rng: &mut RngStream) -> (ParamDraw, Vec<f64>, DesignMatrix) {
    let p = 1 + (rng.next_u64_mod(3)) as usize;
    let k = 1 + (rng.next_u64_mod(3)) as usize;
    let rho = random_stationary_rho(p, 0.9, rng);
    let beta: Vec<f64> = (0..k).map(|_| 3.0 * rng.standard_normal()).collect();
    let sigma2 = 0.3 + 2.0 * rng.open01();
    let x = random_design(len, k, rng);
    let fit = x.fitted(&beta);
    let z: Vec<f64> = fit.iter().map(|m| m + 2.0 * rng.standard_normal()).collect();
    (ParamDraw::new(beta, rho, sigma2).unwrap(), z, x)
}

trait ModDraw {
    fn next_u64_mod(&mut self, n: u64) -> u64;
}

impl ModDraw for RngStream {
    fn next_u64_mod(&mut self, n: u64) -> u64 {
        (self.open01() * n as f64) as u64 % n
    }
}

/// Largest absolute gap between the streamed and dense log-likelihoods.
pub fn likelihood_max_error(instances: usize, len: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (theta, z, x) = random_instance(len, &mut rng);
        let dense = dense_log_density(&z, &x.fitted(&theta.beta), &dense_sigma(&theta.rho, theta.sigma2, len));
        let fast = complete_log_likelihood(&theta, &z, &x).unwrap();
        worst = worst.max((dense - fast).abs());
    }
    worst
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// z-scores of sample mean and variance against analytic values.
fn moment_z(name: &str, xs: &[f64], mean: f64, var: f64) -> Vec<(String, f64)> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    vec![
        (format!("{name} mean"), (m - mean) / (v / n).sqrt()),
        (format!("{name} variance"), (v - var) / ((m4 - v * v) / n).sqrt()),
    ]
}

/// Moment z-scores for every sampler at `n` draws each.
pub fn distribution_z_scores(n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut rng = RngStream::new(seed, 3);

    // (mu, sigma, bound) for an upper bound; deep-tail case last.
    for &(mu, sigma, b) in &[(0.0, 1.0, 0.0), (2.0, 1.5, 0.5), (-1.0, 0.5, 1.0), (10.0, 1.0, 2.0)] {
        let tn = TruncatedNormal::new(mu, sigma, b, TruncationSide::UpperBounded).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| tn.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&v| v <= b));
        let a = (b - mu) / sigma;
        let lambda = phi(a) / big_phi(a);
        let mean = mu - sigma * lambda;
        let var = sigma * sigma * (1.0 - a * lambda - lambda * lambda);
        out.extend(moment_z(&format!("truncated normal upper ({mu}, {sigma}, {b})"), &xs, mean, var));
    }
    for &(mu, sigma, b) in &[(0.0, 2.0, 1.0), (-6.0, 1.0, 1.0)] {
        let tn = TruncatedNormal::new(mu, sigma, b, TruncationSide::LowerBounded).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| tn.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&v| v >= b));
        let a = (b - mu) / sigma;
        let lambda = phi(a) / big_phi(-a);
        let mean = mu + sigma * lambda;
        let var = sigma * sigma * (1.0 + a * lambda - lambda * lambda);
        out.extend(moment_z(&format!("truncated normal lower ({mu}, {sigma}, {b})"), &xs, mean, var));
    }

    for &(shape, rate) in &[(10.0, 5.0), (358.0, 300.0)] {
        let xs: Vec<f64> = (0..n).map(|_| sample_inverse_gamma(shape, rate, &mut rng).unwrap()).collect();
        let mean = rate / (shape - 1.0);
        let var = mean * mean / (shape - 2.0);
        out.extend(moment_z(&format!("inverse gamma ({shape}, {rate})"), &xs, mean, var));
    }

    let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5]);
    let draws: Vec<DVector<f64>> = (0..n).map(|_| sample_multivariate_normal(&mean, &cov, &mut rng).unwrap()).collect();
    for i in 0..3 {
        let xs: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        out.extend(moment_z(&format!("mvn component {i}"), &xs, mean[i], cov[(i, i)]));
        for j in 0..i {
            let prods: Vec<f64> = draws.iter().map(|d| (d[i] - mean[i]) * (d[j] - mean[j])).collect();
            let nn = n as f64;
            let m = prods.iter().sum::<f64>() / nn;
            let v = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (nn - 1.0);
            out.push((format!("mvn covariance ({i}, {j})"), (m - cov[(i, j)]) / (v / nn).sqrt()));
        }
    }
    out
}

/// AR(1) target `|Q| exp(-RSS / (2 sigma2))` written out by hand.
pub fn ar1_log_target(rho: f64, beta: &[f64], sigma2: f64, z: &[f64], x: &DesignMatrix) -> f64 {
    let mu = x.fitted(beta);
    let e: Vec<f64> = z.iter().zip(&mu).map(|(a, b)| a - b).collect();
    let mut rss = (1.0 - rho * rho) * e[0] * e[0];
    for t in 1..e.len() {
        rss += (e[t] - rho * e[t - 1]).powi(2);
    }
    0.5 * (1.0 - rho * rho).ln() - rss / (2.0 * sigma2)
}

/// Total variation between an MH histogram of `rho` and grid quadrature
/// of its target, over `bins` equal bins on (-1, 1).
pub fn mh_total_variation(steps: usize, bins: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, 4);
    let len = 40;
    let x = random_design(len, 2, &mut rng);
    let beta = vec![1.0, 0.5];
    let sigma2: f64 = 1.5;
    let mut u = 0.0;
    let z: Vec<f64> = x
        .fitted(&beta)
        .iter()
        .map(|m| {
            u = 0.6 * u + sigma2.sqrt() * rng.standard_normal();
            m + u
        })
        .collect();

    let sub = 400;
    let width = 2.0 / bins as f64;
    let mut target: Vec<f64> = (0..bins)
        .map(|b| {
            (0..sub)
                .map(|s| {
                    let r = -1.0 + width * (b as f64 + (s as f64 + 0.5) / sub as f64);
                    ar1_log_target(r, &beta, sigma2, &z, &x).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = target.iter().sum();
    target.iter_mut().for_each(|v| *v /= total);

    let mut counts = vec![0usize; bins];
    let mut rho = vec![0.0];
    for _ in 0..steps {
        rho = draw_rho(&beta, sigma2, &rho, &z, &x, InterceptMode::Transformed, 0.25, &mut rng).unwrap().0;
        let b = (((rho[0] + 1.0) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    0.5 * counts.iter().zip(&target).map(|(&c, &p)| (c as f64 / steps as f64 - p).abs()).sum::<f64>()
}
