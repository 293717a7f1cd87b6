//! Jackknife standard errors and intervals for the fitted line, and
//! prediction at a decision level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::error::{Error, Result};
use crate::known::{fit_known, fit_known_with, DemingFit, KnownOptions};
use crate::profiles::PrecisionProfile;
use crate::rl::{fit_rl, fit_rl_with, RlFit, RlOptions, RlStart};
use crate::stats;

/// Which likelihood a fit (and every refit) uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitter {
    /// Precision profiles supplied for both methods.
    Known {
        gx: PrecisionProfile,
        hy: PrecisionProfile,
    },
    /// Common Rocke-Lorenzato profile estimated from the data.
    Rl { lambda: f64 },
}

/// A converged fit from either variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineFit {
    Known(DemingFit),
    Rl(RlFit),
}

impl LineFit {
    pub fn alpha(&self) -> f64 {
        match self {
            LineFit::Known(f) => f.alpha,
            LineFit::Rl(f) => f.alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            LineFit::Known(f) => f.beta,
            LineFit::Rl(f) => f.beta,
        }
    }

    pub fn minus2_log_l(&self) -> f64 {
        match self {
            LineFit::Known(f) => f.minus2_log_l,
            LineFit::Rl(f) => f.minus2_log_l,
        }
    }

    pub fn mu_hat(&self) -> &[f64] {
        match self {
            LineFit::Known(f) => &f.mu_hat,
            LineFit::Rl(f) => &f.mu_hat,
        }
    }
}

impl Fitter {
    pub fn label(&self) -> &'static str {
        match self {
            Fitter::Known { .. } => "known",
            Fitter::Rl { .. } => "rl",
        }
    }

    pub fn fit(&self, data: &MCDataset) -> Result<LineFit> {
        match self {
            Fitter::Known { gx, hy } => fit_known(data, gx, hy).map(LineFit::Known),
            Fitter::Rl { lambda } => fit_rl(data, *lambda).map(LineFit::Rl),
        }
    }

    /// Refit starting from a nearby solution (a subset of the same data).
    pub fn refit(&self, data: &MCDataset, near: &LineFit) -> Result<LineFit> {
        match (self, near) {
            (Fitter::Known { gx, hy }, _) => fit_known_with(
                data,
                gx,
                hy,
                &KnownOptions::default(),
                Some((near.alpha(), near.beta())),
            )
            .map(LineFit::Known),
            (Fitter::Rl { lambda }, LineFit::Rl(f)) => {
                let opts = RlOptions {
                    starts: 1,
                    ..RlOptions::default()
                };
                fit_rl_with(data, *lambda, &opts, Some(RlStart::from(f))).map(LineFit::Rl)
            }
            (Fitter::Rl { .. }, LineFit::Known(_)) => self.fit(data),
        }
    }
}

/// Interval `estimate -/+ z se`.
fn interval(estimate: f64, se: f64, z: f64) -> (f64, f64) {
    (estimate - z * se, estimate + z * se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub alpha: f64,
    pub beta: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub cov_ab: f64,
    pub ci_alpha: (f64, f64),
    pub ci_beta: (f64, f64),
    pub level: f64,
    pub method: String,
    /// Mean pseudo-values: bias-corrected estimates, reported alongside.
    pub alpha_jackknife: f64,
    pub beta_jackknife: f64,
    pub n: usize,
}

pub const DEFAULT_LEVEL: f64 = 0.95;

pub fn jackknife(data: &MCDataset, fitter: &Fitter) -> Result<InferenceResult> {
    jackknife_at(data, fitter, DEFAULT_LEVEL)
}

/// Pseudo-value jackknife at the given confidence level.
///
/// The samples are put in a canonical order first, so the result does not
/// depend on the order they were supplied in.
pub fn jackknife_at(data: &MCDataset, fitter: &Fitter, level: f64) -> Result<InferenceResult> {
    let z = stats::z_for_level(level)?;
    let n = data.n();
    if n < 5 {
        return Err(Error::data(format!("the jackknife needs at least 5 samples, got {n}")));
    }
    let mut samples = data.samples().to_vec();
    samples.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.index.cmp(&b.index))
    });
    let canonical = MCDataset::new(samples)?;
    let full = fitter.fit(&canonical)?;

    let leave_out: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|pos| {
            let index = canonical.samples()[pos].index;
            canonical
                .without_position(pos)
                .and_then(|d| fitter.refit(&d, &full))
                .map(|f| (f.alpha(), f.beta()))
                .map_err(|e| Error::Inference {
                    index,
                    source: Box::new(e),
                })
        })
        .collect();
    let leave_out = leave_out.into_iter().collect::<Result<Vec<_>>>()?;

    let (a, b) = (full.alpha(), full.beta());
    let nf = n as f64;
    let pa: Vec<f64> = leave_out.iter().map(|l| nf * a - (nf - 1.0) * l.0).collect();
    let pb: Vec<f64> = leave_out.iter().map(|l| nf * b - (nf - 1.0) * l.1).collect();
    let (ma, mb) = (stats::mean(&pa), stats::mean(&pb));
    let se_alpha = stats::sd(&pa) / nf.sqrt();
    let se_beta = stats::sd(&pb) / nf.sqrt();
    let cov = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / ((nf - 1.0) * nf);
    let bound = se_alpha * se_beta;
    let cov_ab = cov.clamp(-bound, bound);

    Ok(InferenceResult {
        alpha: a,
        beta: b,
        se_alpha,
        se_beta,
        cov_ab,
        ci_alpha: interval(a, se_alpha, z),
        ci_beta: interval(b, se_beta, z),
        level,
        method: fitter.label().to_string(),
        alpha_jackknife: ma,
        beta_jackknife: mb,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub x0: f64,
    pub yhat: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

/// The fitted line at `x0` with its delta-method interval.
pub fn predict(inf: &InferenceResult, x0: f64) -> Result<Prediction> {
    if !x0.is_finite() {
        return Err(Error::domain(format!("decision level must be finite, got {x0}")));
    }
    let z = stats::z_for_level(inf.level)?;
    let yhat = inf.alpha + inf.beta * x0;
    let se = if x0 == 0.0 {
        inf.se_alpha
    } else {
        let var = inf.se_alpha.powi(2) + x0 * x0 * inf.se_beta.powi(2) + 2.0 * x0 * inf.cov_ab;
        let size = inf.se_alpha.powi(2) + x0 * x0 * inf.se_beta.powi(2);
        if var >= 0.0 {
            var.sqrt()
        } else if var >= -1e-12 * size {
            0.0
        } else {
            return Err(Error::Consistency(format!(
                "prediction variance {var} is negative at x0 = {x0}"
            )));
        }
    };
    Ok(Prediction {
        x0,
        yhat,
        se,
        ci: interval(yhat, se, z),
    })
}
