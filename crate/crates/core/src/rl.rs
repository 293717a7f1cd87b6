//! Standalone weighted Deming fit under a common Rocke-Lorenzato profile.
//!
//! Without external precision information both methods are assumed to share
//! `sigma^2 + (kappa mu)^2`, with the predicate's variance multiplied by a
//! known ratio `lambda`. The -2 log likelihood is minimized over
//! `(sigma, kappa, alpha, beta)` and the `n` latent means: a simplex search on
//! `(ln sigma, ln kappa, alpha, beta)` outside, a safeguarded Newton solve for
//! each latent mean inside.

use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::error::{Error, Result};
use crate::optim::{cholesky_solve, nelder_mead_mapped, NelderMeadOptions};
use crate::profiles::PrecisionProfile;
use crate::stats;

/// Relative floor applied to `sigma` (times the data scale) and `kappa`.
pub const PARAM_FLOOR: f64 = 1e-8;

/// `sigma / scale` or `kappa` below this is reported as a boundary fit: its
/// share of any variance is under `1e-10` and beneath likelihood resolution.
pub const BOUNDARY_REL: f64 = 1e-5;

const EXPLORE_TOL: f64 = 1e-4;

const WARM_LIFT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlFit {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub mu_hat: Vec<f64>,
    #[serde(rename = "minus2logL")]
    pub minus2_log_l: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// `sigma` hit its floor: effectively the constant-CV special case.
    pub sigma_at_boundary: bool,
    /// `kappa` hit its floor: effectively the constant-variance special case.
    pub kappa_at_boundary: bool,
}

impl RlFit {
    /// The common profile `sigma^2 + (kappa mu)^2`.
    pub fn profile(&self) -> PrecisionProfile {
        PrecisionProfile::rocke_lorenzato(self.sigma, self.kappa)
            .expect("fitted parameters are non-negative")
    }

    /// Model variance of the raw residual `y - alpha - beta x` at `x`.
    pub fn residual_variance(&self, x: f64) -> f64 {
        let (s2, k2) = (self.sigma * self.sigma, self.kappa * self.kappa);
        self.lambda * self.beta * self.beta * (s2 + k2 * x * x)
            + s2
            + k2 * (self.alpha + self.beta * x).powi(2)
    }
}

/// Starting point for the outer search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlStart {
    pub sigma: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl From<&RlFit> for RlStart {
    fn from(f: &RlFit) -> Self {
        Self {
            sigma: f.sigma,
            kappa: f.kappa,
            alpha: f.alpha,
            beta: f.beta,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RlOptions {
    /// Number of jittered starts when no warm start is given (at most 3).
    pub starts: usize,
    /// Simplex diameter tolerance in the scaled coordinates.
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for RlOptions {
    fn default() -> Self {
        Self {
            starts: 3,
            tol: 1e-9,
            max_evals: 2000,
        }
    }
}

/// One sample's term of the likelihood.
#[inline]
fn term(x: f64, y: f64, a: f64, b: f64, mu: f64, s2: f64, k2: f64, lambda: f64) -> f64 {
    let g = s2 + k2 * mu * mu;
    let m = a + b * mu;
    let h = s2 + k2 * m * m;
    (x - mu).powi(2) / (lambda * g) + (y - m).powi(2) / h + (g * h).ln()
}

/// Minimizes one sample's term over its latent mean, starting from the
/// closed-form mean with variances evaluated at the observations.
pub(crate) fn inner_min(x: f64, y: f64, a: f64, b: f64, s2: f64, k2: f64, lambda: f64) -> (f64, f64) {
    let g0 = lambda * (s2 + k2 * x * x);
    let h0 = s2 + k2 * y * y;
    let mut mu = (h0 * x + g0 * b * (y - a)) / (h0 + g0 * b * b);
    if !mu.is_finite() {
        mu = x;
    }
    let mut f = term(x, y, a, b, mu, s2, k2, lambda);
    for _ in 0..30 {
        let u = x - mu;
        let g = s2 + k2 * mu * mu;
        let g1 = 2.0 * k2 * mu;
        let g2 = 2.0 * k2;
        let m = a + b * mu;
        let v = y - m;
        let h = s2 + k2 * m * m;
        let h1 = 2.0 * k2 * m * b;
        let h2 = 2.0 * k2 * b * b;
        let (ig, ih) = (1.0 / g, 1.0 / h);
        let d1 = (-2.0 * u * ig - u * u * g1 * ig * ig) / lambda
            + (-2.0 * b * v * ih - v * v * h1 * ih * ih)
            + g1 * ig
            + h1 * ih;
        let d2 = (2.0 * ig + 4.0 * u * g1 * ig * ig - u * u * g2 * ig * ig
            + 2.0 * u * u * g1 * g1 * ig * ig * ig)
            / lambda
            + (2.0 * b * b * ih + 4.0 * b * v * h1 * ih * ih - v * v * h2 * ih * ih
                + 2.0 * v * v * h1 * h1 * ih * ih * ih)
            + (g2 * ig - g1 * g1 * ig * ig)
            + (h2 * ih - h1 * h1 * ih * ih);
        let curvature = if d2 > 0.0 {
            d2
        } else {
            2.0 * ig / lambda + 2.0 * b * b * ih
        };
        let mut step = -d1 / curvature;
        let tol = 1e-12 * (mu.abs() + g.sqrt());
        if !step.is_finite() || step.abs() <= tol {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let cand = mu + step;
            let fc = term(x, y, a, b, cand, s2, k2, lambda);
            if fc <= f {
                mu = cand;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
            if step.abs() <= tol {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    (mu, f)
}

/// -2 log likelihood minimized over the latent means, for given structural
/// parameters. Returns the total and the minimizing means.
pub fn profile_log_l(
    data: &MCDataset,
    lambda: f64,
    sigma: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> (f64, Vec<f64>) {
    let (s2, k2) = (sigma * sigma, kappa * kappa);
    let mut total = 0.0;
    let mut mu = Vec::with_capacity(data.n());
    for s in data.samples() {
        let (m, f) = inner_min(s.x, s.y, alpha, beta, s2, k2, lambda);
        total += f;
        mu.push(m);
    }
    (total, mu)
}

/// Gradient of [`profile_log_l`] in `(sigma, kappa, alpha, beta)`.
///
/// The latent means sit at their inner minimum, so only the explicit
/// dependence on the structural parameters contributes.
pub fn profile_gradient(
    data: &MCDataset,
    lambda: f64,
    sigma: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
) -> (f64, [f64; 4]) {
    let (s2, k2) = (sigma * sigma, kappa * kappa);
    let mut total = 0.0;
    let mut grad = [0.0; 4];
    for s in data.samples() {
        let (mu, f) = inner_min(s.x, s.y, alpha, beta, s2, k2, lambda);
        total += f;
        let g = s2 + k2 * mu * mu;
        let m = alpha + beta * mu;
        let h = s2 + k2 * m * m;
        let (u, v) = (s.x - mu, s.y - m);
        let d_g = (1.0 - u * u / (lambda * g)) / g;
        let d_h = (1.0 - v * v / h) / h;
        let d_m = -2.0 * v / h + d_h * 2.0 * k2 * m;
        grad[0] += 2.0 * sigma * (d_g + d_h);
        grad[1] += 2.0 * kappa * (d_g * mu * mu + d_h * m * m);
        grad[2] += d_m;
        grad[3] += d_m * mu;
    }
    (total, grad)
}

/// Newton refinement of an interior optimum on the analytic gradient.
///
/// Along weakly identified directions the likelihood changes by less than
/// its rounding error, while its gradient is still resolved. Steps are taken
/// in `(ln sigma, ln kappa, alpha, beta)` and only while they stay local and
/// shrink the gradient.
fn newton_polish(data: &MCDataset, lambda: f64, scale: f64, start: [f64; 4]) -> [f64; 4] {
    let grad_at = |u: &[f64; 4]| {
        let (sigma, kappa) = (u[0].exp(), u[1].exp());
        let (f, g) = profile_gradient(data, lambda, sigma, kappa, u[2], u[3]);
        (f, [sigma * g[0], kappa * g[1], g[2], g[3]])
    };
    let typical = [1.0, 1.0, scale, 1.0];
    let size = |g: &[f64; 4]| (0..4).map(|i| (g[i] * typical[i]).powi(2)).sum::<f64>();
    let mut u = [start[0].ln(), start[1].ln(), start[2], start[3]];
    let (mut f, mut g) = grad_at(&u);
    for _ in 0..8 {
        let mut hess = [0.0; 16];
        for j in 0..4 {
            let step = 1e-5 * typical[j];
            let (mut up, mut down) = (u, u);
            up[j] += step;
            down[j] -= step;
            let (gu, gd) = (grad_at(&up).1, grad_at(&down).1);
            for i in 0..4 {
                hess[i * 4 + j] = (gu[i] - gd[i]) / (2.0 * step);
            }
        }
        for i in 0..4 {
            for j in 0..i {
                let avg = 0.5 * (hess[i * 4 + j] + hess[j * 4 + i]);
                hess[i * 4 + j] = avg;
                hess[j * 4 + i] = avg;
            }
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(delta) = cholesky_solve(&hess, &rhs) else { break };
        if (0..4).any(|i| !(delta[i].abs() <= 1e-2 * typical[i])) {
            break;
        }
        let mut cand = u;
        for i in 0..4 {
            cand[i] += delta[i];
        }
        let (fc, gc) = grad_at(&cand);
        if !(fc <= f + 1e-12 * f.abs().max(1.0)) || !(size(&gc) < size(&g)) {
            break;
        }
        let tiny = (0..4).all(|i| delta[i].abs() <= 1e-14 * typical[i].max(cand[i].abs()));
        (u, f, g) = (cand, fc, gc);
        if tiny {
            break;
        }
    }
    [u[0].exp(), u[1].exp(), u[2], u[3]]
}

/// -2 log likelihood at fully specified parameters, latent means included.
pub fn minus2_log_l(
    data: &MCDataset,
    lambda: f64,
    sigma: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
    mu: &[f64],
) -> f64 {
    let (s2, k2) = (sigma * sigma, kappa * kappa);
    data.samples()
        .iter()
        .zip(mu)
        .map(|(s, &m)| term(s.x, s.y, alpha, beta, m, s2, k2, lambda))
        .sum()
}

pub fn fit_rl(data: &MCDataset, lambda: f64) -> Result<RlFit> {
    fit_rl_with(data, lambda, &RlOptions::default(), None)
}

pub fn fit_rl_with(
    data: &MCDataset,
    lambda: f64,
    opts: &RlOptions,
    warm: Option<RlStart>,
) -> Result<RlFit> {
    if data.n() < 5 {
        return Err(Error::data(format!(
            "the standalone fit needs at least 5 samples, got {}",
            data.n()
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::domain(format!("lambda must be finite and positive, got {lambda}")));
    }
    let xs = data.xs();
    let ys = data.ys();
    let scale = stats::mean(&xs.iter().map(|v| v.abs()).collect::<Vec<_>>());
    if !(scale > 0.0) {
        return Err(Error::data("predicate values are all zero"));
    }
    let ln_floor = PARAM_FLOOR.ln();

    // Coordinates below the floor are mirrored back above it, so a boundary
    // optimum is a sharp minimum the simplex can collapse onto.
    let mirror = |v: f64| if v < ln_floor { 2.0 * ln_floor - v } else { v };
    let unpack = |t: &[f64]| {
        (
            scale * mirror(t[0]).exp(),
            mirror(t[1]).exp(),
            t[2] * scale,
            t[3],
        )
    };
    let objective = |t: &[f64]| {
        let (sigma, kappa, alpha, beta) = unpack(t);
        profile_log_l(data, lambda, sigma, kappa, alpha, beta).0
    };
    let pack = |s: &RlStart| {
        vec![
            (s.sigma / scale).max(PARAM_FLOOR).ln(),
            s.kappa.max(PARAM_FLOOR).ln(),
            s.alpha / scale,
            s.beta,
        ]
    };

    let (a0, b0) = stats::ols(&xs, &ys)?;
    let resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - a0 - b0 * x).collect();
    let rms = stats::rms(&resid).max(10.0 * PARAM_FLOOR * scale);
    let (s0, k0) = (0.5 * rms, 0.5 * rms / scale);
    let cold = |count: usize| -> Vec<RlStart> {
        [(1.0, 1.0), (4.0, 0.25), (0.25, 4.0)]
            .iter()
            .take(count)
            .map(|&(fs, fk)| RlStart {
                sigma: s0 * fs,
                kappa: k0 * fk,
                alpha: a0,
                beta: b0,
            })
            .collect()
    };
    let starts: Vec<RlStart> = match warm {
        // A warm start sitting on a boundary can stay trapped there after the
        // data change, so its variance parameters are lifted off it first and
        // the cold starts compete with it.
        Some(w) => {
            let mut v = vec![RlStart {
                sigma: w.sigma.max(WARM_LIFT * s0),
                kappa: w.kappa.max(WARM_LIFT * k0),
                ..w
            }];
            if w.sigma < BOUNDARY_REL * scale || w.kappa < BOUNDARY_REL {
                v.extend(cold(3));
            }
            v
        }
        None => cold(opts.starts.clamp(1, 3)),
    };

    let nm = NelderMeadOptions {
        step: vec![0.5, 0.5, 0.02, 0.02],
        tol_diameter: opts.tol,
        tol_f: f64::INFINITY,
        max_evals: opts.max_evals,
    };
    // Convergence is judged on the natural parameters (scaled), so a
    // coordinate drifting on the flat stretch near zero does not stall it.
    let natural = |t: &[f64], out: &mut [f64]| {
        out[0] = mirror(t[0]).exp();
        out[1] = mirror(t[1]).exp();
        out[2] = t[2];
        out[3] = t[3];
    };
    let mut evaluations = 0;
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    // Starts only need to locate the basin; the restart does the polishing.
    let explore = NelderMeadOptions {
        tol_diameter: opts.tol.max(EXPLORE_TOL),
        ..nm.clone()
    };
    for s in &starts {
        let r = nelder_mead_mapped(objective, &pack(s), &explore, natural);
        evaluations += r.evals;
        if best.as_ref().map_or(true, |b| r.f < b.1) {
            best = Some((r.x, r.f, r.converged));
        }
    }
    let (x_best, _, _) = best.expect("at least one start");
    // Restart from the best vertex with a fresh simplex.
    let restart_opts = NelderMeadOptions {
        step: vec![0.05, 0.05, 0.002, 0.002],
        ..nm
    };
    let r = nelder_mead_mapped(objective, &x_best, &restart_opts, natural);
    evaluations += r.evals;
    let (mut sigma, mut kappa, mut alpha, mut beta) = unpack(&r.x);
    if !r.converged {
        return Err(Error::NonConvergence {
            iterations: evaluations,
            alpha,
            beta,
        });
    }
    let sigma_at_boundary = sigma < BOUNDARY_REL * scale;
    let kappa_at_boundary = kappa < BOUNDARY_REL;
    if !sigma_at_boundary && !kappa_at_boundary {
        [sigma, kappa, alpha, beta] = newton_polish(data, lambda, scale, [sigma, kappa, alpha, beta]);
    }
    if beta == 0.0 {
        return Err(Error::degenerate("fitted slope is exactly zero"));
    }
    let (value, mu_hat) = profile_log_l(data, lambda, sigma, kappa, alpha, beta);
    Ok(RlFit {
        alpha,
        beta,
        sigma,
        kappa,
        lambda,
        mu_hat,
        minus2_log_l: value,
        converged: true,
        evaluations,
        sigma_at_boundary,
        kappa_at_boundary,
    })
}
