//! Comparator estimators: Passing-Bablok, Linnet's constant-CV weighted
//! Deming, and the maximum-likelihood constant-CV fit.

use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::error::{Error, Result};
use crate::known::{latent_mu, KnownOptions};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMethod {
    PassingBablok,
    #[serde(rename = "LinnetCCV")]
    LinnetCcv,
    #[serde(rename = "MLConstantCV")]
    MlConstantCv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub method: BaselineMethod,
    pub alpha: f64,
    pub beta: f64,
    /// Rank-based intervals; Passing-Bablok only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_alpha: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_beta: Option<(f64, f64)>,
    /// Variance ratio used by the constant-CV methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub iterations: usize,
}

/// Sorted admissible pairwise slopes and the shift `K` (count below -1).
///
/// Pairs with equal `x` and slopes of exactly -1 are dropped.
pub fn pairwise_slopes(xs: &[f64], ys: &[f64]) -> (Vec<f64>, usize) {
    let n = xs.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[j] - xs[i];
            if dx == 0.0 {
                continue;
            }
            let s = (ys[j] - ys[i]) / dx;
            if s != -1.0 && s.is_finite() {
                slopes.push(s);
            }
        }
    }
    slopes.sort_by(f64::total_cmp);
    let shift = slopes.iter().take_while(|&&s| s < -1.0).count();
    (slopes, shift)
}

/// Shifted median of the pairwise slopes.
pub fn shifted_median_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (slopes, k) = pairwise_slopes(xs, ys);
    let n = slopes.len();
    if n == 0 {
        return Err(Error::degenerate("no admissible pairwise slopes"));
    }
    if n % 2 == 1 {
        let pos = (n + 1) / 2 + k;
        slopes
            .get(pos - 1)
            .copied()
            .ok_or_else(|| Error::degenerate("slope shift exceeds the number of slopes"))
    } else {
        let pos = n / 2 + k;
        match (slopes.get(pos - 1), slopes.get(pos)) {
            (Some(a), Some(b)) => Ok(0.5 * (a + b)),
            _ => Err(Error::degenerate("slope shift exceeds the number of slopes")),
        }
    }
}

/// Passing-Bablok regression with rank-based confidence intervals.
pub fn passing_bablok(data: &MCDataset, level: f64) -> Result<BaselineFit> {
    let n = data.n();
    if n < 10 {
        return Err(Error::data(format!("Passing-Bablok needs at least 10 samples, got {n}")));
    }
    let z = stats::z_for_level(level)?;
    let xs = data.xs();
    let ys = data.ys();
    let (slopes, k) = pairwise_slopes(&xs, &ys);
    let count = slopes.len();
    if count < 2 {
        return Err(Error::degenerate("too few admissible pairwise slopes"));
    }
    let beta = shifted_median_slope(&xs, &ys)?;
    let nf = n as f64;
    let c = z * (nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0).sqrt();
    let m1 = ((count as f64 - c) / 2.0).round().max(1.0) as usize;
    let m2 = count + 1 - m1;
    let at = |m: usize| slopes[(m + k).clamp(1, count) - 1];
    let (b_lo, b_hi) = (at(m1), at(m2));

    let intercept = |b: f64| {
        stats::median(&xs.iter().zip(&ys).map(|(x, y)| y - b * x).collect::<Vec<_>>())
    };
    let alpha = intercept(beta);
    let (a1, a2) = (intercept(b_hi), intercept(b_lo));
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::degenerate("Passing-Bablok slope is zero"));
    }
    Ok(BaselineFit {
        method: BaselineMethod::PassingBablok,
        alpha,
        beta,
        ci_alpha: Some((a1.min(a2), a1.max(a2))),
        ci_beta: Some((b_lo, b_hi)),
        lambda: None,
        iterations: 0,
    })
}

fn check_positive(data: &MCDataset, lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::domain(format!("lambda must be finite and positive, got {lambda}")));
    }
    if data.samples().iter().any(|s| s.x <= 0.0 || s.y <= 0.0) {
        return Err(Error::data("constant-CV fits need strictly positive measurements"));
    }
    Ok(())
}

/// Deming slope and intercept with common per-sample weights `w` on both
/// squared deviations and the `y` deviation further weighted by `lambda`.
fn weighted_deming(xs: &[f64], ys: &[f64], w: &[f64], lambda: f64) -> Result<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let (mut u, mut q, mut p) = (0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        u += w[i] * dx * dx;
        q += w[i] * dy * dy;
        p += w[i] * dx * dy;
    }
    if p == 0.0 {
        return Err(Error::degenerate("zero weighted covariance"));
    }
    let delta = 1.0 / lambda;
    let beta = (q - delta * u + ((q - delta * u).powi(2) + 4.0 * delta * p * p).sqrt()) / (2.0 * p);
    Ok((my - beta * mx, beta))
}

/// Linnet's constant-CV weighted Deming regression.
///
/// Each pass projects the observations onto the current line along the
/// `lambda`-weighted direction, forms the consensus means
/// `c_i = (x_hat_i + y_hat_i) / 2`, and refits with common weights `1 / c_i^2`.
pub fn linnet_ccv(data: &MCDataset, lambda: f64) -> Result<BaselineFit> {
    check_positive(data, lambda)?;
    let opts = KnownOptions::default();
    let xs = data.xs();
    let ys = data.ys();
    let scale = stats::mean(&ys);
    let (mut alpha, mut beta) = (0.0, 1.0);
    let mut w = vec![0.0; xs.len()];
    for iter in 1..=opts.max_iter {
        let d = 1.0 + lambda * beta * beta;
        for i in 0..xs.len() {
            let r = ys[i] - alpha - beta * xs[i];
            let x_hat = xs[i] + lambda * beta * r / d;
            let y_hat = ys[i] - r / d;
            let c = 0.5 * (x_hat + y_hat);
            if !(c > 0.0) {
                return Err(Error::degenerate(format!(
                    "non-positive consensus mean at sample {}",
                    data.samples()[i].index
                )));
            }
            w[i] = 1.0 / (c * c);
        }
        let (a, b) = weighted_deming(&xs, &ys, &w, lambda)?;
        let step = ((a - alpha).abs() / scale).max((b - beta).abs());
        alpha = a;
        beta = b;
        if step < opts.tol_param {
            return Ok(BaselineFit {
                method: BaselineMethod::LinnetCcv,
                alpha,
                beta,
                ci_alpha: None,
                ci_beta: None,
                lambda: Some(lambda),
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        alpha,
        beta,
    })
}

/// Maximum-likelihood fit of the constant-CV model
/// `X ~ N(mu, lambda A mu^2)`, `Y ~ N(alpha + beta mu, A (alpha + beta mu)^2)`.
///
/// Alternates the latent-mean update (variances from the previous means) with
/// a weighted least-squares refit of `y` on the latent means.
pub fn ml_constant_cv(data: &MCDataset, lambda: f64) -> Result<BaselineFit> {
    check_positive(data, lambda)?;
    let opts = KnownOptions::default();
    let xs = data.xs();
    let ys = data.ys();
    let scale = stats::mean(&ys);
    let (mut alpha, mut beta) = stats::ols(&xs, &ys)?;
    let mut mu = xs.clone();
    let mut w = vec![0.0; xs.len()];
    let mut previous = f64::NAN;
    for iter in 1..=opts.max_iter {
        for i in 0..xs.len() {
            let g = lambda * mu[i] * mu[i];
            let h = (alpha + beta * mu[i]).powi(2);
            mu[i] = latent_mu(xs[i], ys[i], alpha, beta, g, h)?;
            w[i] = 1.0 / h;
        }
        let (a, b) = stats::wls(&mu, &ys, &w)?;
        let step = ((a - alpha).abs() / scale).max((b - beta).abs());
        alpha = a;
        beta = b;
        let value: f64 = (0..xs.len())
            .map(|i| {
                let m = alpha + beta * mu[i];
                (xs[i] - mu[i]).powi(2) / mu[i].powi(2) + lambda * (ys[i] - m).powi(2) / (m * m)
            })
            .sum();
        let rel = (value - previous).abs() / value.abs().max(1e-300);
        previous = value;
        if step < opts.tol_param && (rel < opts.tol_loglik || value == 0.0) {
            if beta == 0.0 {
                return Err(Error::degenerate("fitted slope is exactly zero"));
            }
            return Ok(BaselineFit {
                method: BaselineMethod::MlConstantCv,
                alpha,
                beta,
                ci_alpha: None,
                ci_beta: None,
                lambda: Some(lambda),
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        alpha,
        beta,
    })
}
