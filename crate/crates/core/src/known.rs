//! Weighted Deming regression with externally supplied precision profiles.
//!
//! The model is `X_i ~ N(mu_i, g(mu_i))`, `Y_i ~ N(alpha + beta mu_i, h(alpha + beta mu_i))`.
//! Variances enter the likelihood as weights evaluated at the current
//! estimates; each reweighting step solves the weighted problem exactly, by
//! profiling out the latent means and the intercept and locating the slope as
//! a root of the profiled score.

use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::error::{Error, Result};
use crate::optim::bracketed_root;
use crate::profiles::PrecisionProfile;
use crate::stats;

/// Maximum-likelihood latent concentration of one sample for fixed line and
/// variances: `(h x + g beta (y - alpha)) / (h + g beta^2)`.
pub fn latent_mu(x: f64, y: f64, alpha: f64, beta: f64, g: f64, h: f64) -> Result<f64> {
    let denom = h + g * beta * beta;
    if !(denom > 0.0) || g < 0.0 || h < 0.0 {
        return Err(Error::degenerate(format!(
            "latent mean undefined for variances g={g}, h={h}, beta={beta}"
        )));
    }
    Ok((h * x + g * beta * (y - alpha)) / denom)
}

/// One sample's contribution to -2 log L (without the constant).
#[inline]
pub(crate) fn summand(x: f64, y: f64, alpha: f64, beta: f64, mu: f64, g: f64, h: f64) -> f64 {
    (x - mu).powi(2) / g + (y - alpha - beta * mu).powi(2) / h + g.ln() + h.ln()
}

/// -2 log likelihood (up to a constant) with the variances evaluated at the
/// supplied means.
pub fn minus2_log_l(
    data: &MCDataset,
    gx: &PrecisionProfile,
    hy: &PrecisionProfile,
    alpha: f64,
    beta: f64,
    mu: &[f64],
) -> f64 {
    data.samples()
        .iter()
        .zip(mu)
        .map(|(s, &m)| summand(s.x, s.y, alpha, beta, m, gx.at(m), hy.at(alpha + beta * m)))
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct KnownOptions {
    pub max_iter: usize,
    /// Bound on `max(|d alpha| / scale, |d beta|)` between iterations.
    pub tol_param: f64,
    /// Bound on the relative change of -2 log L between iterations.
    pub tol_loglik: f64,
}

impl Default for KnownOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol_param: 1e-10,
            tol_loglik: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemingFit {
    pub alpha: f64,
    pub beta: f64,
    pub mu_hat: Vec<f64>,
    #[serde(rename = "minus2logL")]
    pub minus2_log_l: f64,
    pub profile_x: PrecisionProfile,
    pub profile_y: PrecisionProfile,
    pub converged: bool,
    pub iterations: usize,
    /// -2 log L after each reweighting step.
    pub history: Vec<f64>,
}

impl DemingFit {
    /// Variances `(g_i, h_i)` at the fitted latent means.
    pub fn variances(&self) -> Vec<(f64, f64)> {
        self.mu_hat
            .iter()
            .map(|&m| (self.profile_x.at(m), self.profile_y.at(self.alpha + self.beta * m)))
            .collect()
    }
}

pub fn fit_known(data: &MCDataset, gx: &PrecisionProfile, hy: &PrecisionProfile) -> Result<DemingFit> {
    fit_known_with(data, gx, hy, &KnownOptions::default(), None)
}

/// [`fit_known`] with explicit options and an optional starting line.
pub fn fit_known_with(
    data: &MCDataset,
    gx: &PrecisionProfile,
    hy: &PrecisionProfile,
    opts: &KnownOptions,
    start: Option<(f64, f64)>,
) -> Result<DemingFit> {
    let xs = data.xs();
    let ys = data.ys();
    let (mut alpha, mut beta) = match start {
        Some(s) => s,
        None => stats::ols(&xs, &ys)?,
    };
    let mut mu = match start {
        Some((a, b)) => {
            let mut m = xs.clone();
            for (i, v) in m.iter_mut().enumerate() {
                *v = latent_mu(xs[i], ys[i], a, b, gx.at(xs[i]), hy.at(ys[i]))?;
            }
            m
        }
        None => xs.clone(),
    };
    let scale = stats::mean(&ys.iter().map(|v| v.abs()).collect::<Vec<_>>()).max(f64::MIN_POSITIVE);

    let n = xs.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut history = Vec::new();
    let mut previous = f64::NAN;
    for iter in 1..=opts.max_iter {
        for i in 0..n {
            g[i] = gx.at(mu[i]);
            h[i] = hy.at(alpha + beta * mu[i]);
            if !(g[i] >= 0.0 && h[i] > 0.0 || g[i] > 0.0 && h[i] >= 0.0) {
                return Err(Error::degenerate(format!(
                    "profiles give non-positive variance at sample {}",
                    data.samples()[i].index
                )));
            }
        }
        let (a_new, b_new) = solve_fixed_weights(&xs, &ys, &g, &h, beta)?;
        for i in 0..n {
            mu[i] = latent_mu(xs[i], ys[i], a_new, b_new, g[i], h[i])?;
        }
        let step = ((a_new - alpha).abs() / scale).max((b_new - beta).abs());
        alpha = a_new;
        beta = b_new;
        let value = minus2_log_l(data, gx, hy, alpha, beta, &mu);
        history.push(value);
        let rel = (value - previous).abs() / value.abs().max(1e-300);
        previous = value;
        if step < opts.tol_param && (rel < opts.tol_loglik || !value.is_finite()) {
            if beta == 0.0 {
                return Err(Error::degenerate("fitted slope is exactly zero"));
            }
            return Ok(DemingFit {
                alpha,
                beta,
                mu_hat: mu,
                minus2_log_l: value,
                profile_x: *gx,
                profile_y: *hy,
                converged: true,
                iterations: iter,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        alpha,
        beta,
    })
}

/// Minimizes `sum (y - a - b x)^2 / (h + b^2 g)` over `(a, b)` with `g`, `h`
/// held fixed. This is the weighted Deming criterion after the latent means
/// have been profiled out.
pub fn solve_fixed_weights(
    xs: &[f64],
    ys: &[f64],
    g: &[f64],
    h: &[f64],
    beta0: f64,
) -> Result<(f64, f64)> {
    let intercept = |b: f64| {
        let (mut sw, mut swr) = (0.0, 0.0);
        for i in 0..xs.len() {
            let w = 1.0 / (h[i] + b * b * g[i]);
            sw += w;
            swr += w * (ys[i] - b * xs[i]);
        }
        swr / sw
    };
    // Derivative of the profiled criterion in the slope.
    let score = |b: f64| {
        let a = intercept(b);
        let mut d = 0.0;
        for i in 0..xs.len() {
            let w = 1.0 / (h[i] + b * b * g[i]);
            let r = ys[i] - a - b * xs[i];
            d += -2.0 * b * g[i] * w * w * r * r - 2.0 * w * r * xs[i];
        }
        d
    };

    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 0.0) {
        return Err(Error::RankDeficient("all predicate values are equal".into()));
    }

    let d0 = score(beta0);
    if d0 == 0.0 {
        return Ok((intercept(beta0), beta0));
    }
    // Walk downhill until the score changes sign; the first sign change
    // brackets a local minimum.
    let dir = if d0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 1e-4 * beta0.abs().max(1e-3);
    let mut lo = beta0;
    let mut hi = beta0 + dir * step;
    let mut found = false;
    for _ in 0..200 {
        let d = score(hi);
        if !d.is_finite() {
            break;
        }
        if d == 0.0 || d.signum() != d0.signum() {
            found = true;
            break;
        }
        lo = hi;
        step *= 2.0;
        hi += dir * step;
    }
    if !found {
        return Err(Error::degenerate("weighted Deming criterion has no finite minimum"));
    }
    let b = bracketed_root(score, lo.min(hi), lo.max(hi), 1e-15, 200);
    Ok((intercept(b), b))
}
