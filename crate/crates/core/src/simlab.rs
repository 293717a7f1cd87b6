//! Seeded Monte-Carlo studies of estimator accuracy on synthetic
//! method-comparison data.
//!
//! Every normal deviate is addressed by `(seed, replicate, sample, axis)`:
//! replicate `r` reads its own ChaCha stream and each deviate sits at a fixed
//! word offset, so any replicate can be regenerated alone and replicates may
//! run in any order.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{linnet_ccv, ml_constant_cv, passing_bablok};
use crate::data::{MCDataset, PairedSample};
use crate::error::{Error, Result};
use crate::known::fit_known;
use crate::profiles::PrecisionProfile;
use crate::rl::fit_rl;
use crate::stats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Geometric,
    Arithmetic,
}

/// An estimator to run on every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Known-profile fit with the generating profiles.
    Utopian,
    /// Standalone Rocke-Lorenzato fit.
    Rl {
        #[serde(default = "one")]
        lambda: f64,
    },
    PassingBablok,
    Linnet {
        #[serde(default = "one")]
        lambda: f64,
    },
    /// Linnet with `lambda` set to the design's mean ratio `g / h`.
    LinnetGen,
    MlConstantCv {
        #[serde(default = "one")]
        lambda: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Utopian => "Utopia".into(),
            Estimator::Rl { lambda } if *lambda == 1.0 => "R_L".into(),
            Estimator::Rl { lambda } => format!("R_L {lambda}"),
            Estimator::PassingBablok => "P_B".into(),
            Estimator::Linnet { lambda } => format!("L {lambda}"),
            Estimator::LinnetGen => "L gen".into(),
            Estimator::MlConstantCv { lambda } => format!("ML {lambda}"),
        }
    }
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n: usize,
    pub mu_low: f64,
    pub mu_high: f64,
    #[serde(default)]
    pub spacing: Spacing,
    pub alpha_true: f64,
    pub beta_true: f64,
    pub profile_x: PrecisionProfile,
    pub profile_y: PrecisionProfile,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdl: Option<f64>,
    /// Keep every replicate's estimates in the result.
    #[serde(default)]
    pub keep_raw: bool,
}

impl SimDesign {
    /// Every violated constraint, by field name.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 3 {
            out.push(format!("n: must be at least 3, got {}", self.n));
        }
        if !self.mu_low.is_finite() || !self.mu_high.is_finite() || self.mu_high <= self.mu_low {
            out.push("mu_low/mu_high: need finite mu_low < mu_high".into());
        }
        if self.spacing == Spacing::Geometric && !(self.mu_low > 0.0) {
            out.push("mu_low: must be positive for geometric spacing".into());
        }
        if !self.alpha_true.is_finite() {
            out.push("alpha_true: must be finite".into());
        }
        if !self.beta_true.is_finite() || self.beta_true == 0.0 {
            out.push("beta_true: must be finite and nonzero".into());
        }
        if self.replicates < 1 {
            out.push("replicates: must be at least 1".into());
        }
        if let Some(m) = self.mdl {
            if !m.is_finite() {
                out.push("mdl: must be finite".into());
            }
        }
        for e in &self.estimators {
            match e {
                Estimator::Rl { lambda }
                | Estimator::Linnet { lambda }
                | Estimator::MlConstantCv { lambda }
                    if !(lambda.is_finite() && *lambda > 0.0) =>
                {
                    out.push(format!("estimators: {} needs a positive lambda", e.label()));
                }
                _ => {}
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Simulation(format!("invalid design: {}", p.join("; "))))
        }
    }

    /// True concentrations.
    pub fn mu_grid(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return self.mu_high;
                }
                match self.spacing {
                    Spacing::Geometric => self.mu_low * (self.mu_high / self.mu_low).powf(t),
                    Spacing::Arithmetic => self.mu_low + (self.mu_high - self.mu_low) * t,
                }
            })
            .collect()
    }

    /// Mean of `g(mu) / h(alpha + beta mu)` over the design grid.
    pub fn generated_lambda(&self) -> f64 {
        let grid = self.mu_grid();
        grid.iter()
            .map(|&m| {
                self.profile_x.at(m) / self.profile_y.at(self.alpha_true + self.beta_true * m)
            })
            .sum::<f64>()
            / grid.len() as f64
    }
}

/// Standard normal deviate at a fixed position of replicate `replicate`'s stream.
fn deviate(base: &ChaCha8Rng, replicate: u64, sample: usize, axis: usize) -> f64 {
    let mut rng = base.clone();
    rng.set_stream(replicate);
    rng.set_word_pos(((sample as u128) * 2 + axis as u128) * 4);
    // Box-Muller on two 53-bit uniforms, u1 in (0, 1].
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Synthetic dataset for one replicate.
pub fn generate(design: &SimDesign, replicate: u64) -> Result<MCDataset> {
    design.validate()?;
    let base = ChaCha8Rng::seed_from_u64(design.seed);
    let mut samples = Vec::with_capacity(design.n);
    for (i, &mu) in design.mu_grid().iter().enumerate() {
        let mean_y = design.alpha_true + design.beta_true * mu;
        let vx = design.profile_x.evaluate(mu)?;
        let vy = design.profile_y.evaluate(mean_y)?;
        if !(vx >= 0.0 && vy >= 0.0) {
            return Err(Error::Simulation(format!("negative variance at mu = {mu}")));
        }
        let x = mu + vx.sqrt() * deviate(&base, replicate, i, 0);
        let y = mean_y + vy.sqrt() * deviate(&base, replicate, i, 1);
        samples.push(PairedSample { index: i + 1, x, y });
    }
    MCDataset::new(samples)
}

/// One estimator's output on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub replicate: u64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub estimator: Estimator,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_alpha: f64,
    pub sd_alpha: f64,
    pub mean_beta: f64,
    pub sd_beta: f64,
    pub rmse_alpha: f64,
    pub rmse_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_mdl: Option<f64>,
    /// `100 (rmse_utopian / rmse)^2`; absent when undefined.
    pub eff_alpha: Option<f64>,
    pub eff_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eff_mdl: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub design: SimDesign,
    pub mean_correlation: f64,
    pub generated_lambda: f64,
    pub estimators: Vec<EstimatorSummary>,
}

fn run_estimator(est: &Estimator, design: &SimDesign, data: &MCDataset, replicate: u64) -> Result<Estimate> {
    let line = |alpha, beta| Estimate {
        replicate,
        alpha,
        beta,
        sigma: None,
        kappa: None,
    };
    match est {
        Estimator::Utopian => {
            // Noise-free designs carry no weights; any constant weight is exact.
            let unit = PrecisionProfile::constant_variance(1.0)?;
            let gx = if design.profile_x.is_noise_free() { unit } else { design.profile_x };
            let hy = if design.profile_y.is_noise_free() { unit } else { design.profile_y };
            let f = fit_known(data, &gx, &hy)?;
            Ok(line(f.alpha, f.beta))
        }
        Estimator::Rl { lambda } => {
            let f = fit_rl(data, *lambda)?;
            Ok(Estimate {
                sigma: Some(f.sigma),
                kappa: Some(f.kappa),
                ..line(f.alpha, f.beta)
            })
        }
        Estimator::PassingBablok => {
            let f = passing_bablok(data, 0.95)?;
            Ok(line(f.alpha, f.beta))
        }
        Estimator::Linnet { lambda } => {
            let f = linnet_ccv(data, *lambda)?;
            Ok(line(f.alpha, f.beta))
        }
        Estimator::LinnetGen => {
            let f = linnet_ccv(data, design.generated_lambda())?;
            Ok(line(f.alpha, f.beta))
        }
        Estimator::MlConstantCv { lambda } => {
            let f = ml_constant_cv(data, *lambda)?;
            Ok(line(f.alpha, f.beta))
        }
    }
}

/// Largest tolerated failure fraction per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Runs every estimator on every replicate and tabulates accuracy.
///
/// The utopian estimator is added when missing; it is the efficiency
/// reference. Failed fits are excluded and counted; more than
/// [`MAX_FAILURE_RATE`] failures for any estimator is an error.
pub fn run_study(design: &SimDesign) -> Result<SimResult> {
    design.validate()?;
    let mut estimators = design.estimators.clone();
    if !estimators.contains(&Estimator::Utopian) {
        estimators.insert(0, Estimator::Utopian);
    }
    let per_replicate: Vec<(f64, Vec<Option<Estimate>>)> = (0..design.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate(design, r)?;
            let corr = stats::pearson(&data.xs(), &data.ys());
            let fits = estimators
                .iter()
                .map(|e| run_estimator(e, design, &data, r).ok())
                .collect();
            Ok((corr, fits))
        })
        .collect::<Result<_>>()?;

    let reps = per_replicate.len();
    let mean_correlation = per_replicate.iter().map(|p| p.0).sum::<f64>() / reps as f64;
    let (at, bt) = (design.alpha_true, design.beta_true);
    let mut summaries = Vec::with_capacity(estimators.len());
    for (k, est) in estimators.iter().enumerate() {
        let ok: Vec<Estimate> = per_replicate.iter().filter_map(|p| p.1[k]).collect();
        let n_failed = reps - ok.len();
        if n_failed as f64 > MAX_FAILURE_RATE * reps as f64 {
            return Err(Error::Simulation(format!(
                "{} failed on {n_failed} of {reps} replicates",
                est.label()
            )));
        }
        if ok.is_empty() {
            return Err(Error::Simulation(format!("{} produced no estimates", est.label())));
        }
        let alphas: Vec<f64> = ok.iter().map(|e| e.alpha).collect();
        let betas: Vec<f64> = ok.iter().map(|e| e.beta).collect();
        let spread = |v: &[f64]| if v.len() > 1 { stats::sd(v) } else { 0.0 };
        let rmse = |v: &[f64], t: f64| {
            (v.iter().map(|x| (x - t).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let rmse_mdl = design.mdl.map(|m| {
            let fitted: Vec<f64> = ok.iter().map(|e| e.alpha + e.beta * m).collect();
            rmse(&fitted, at + bt * m)
        });
        summaries.push(EstimatorSummary {
            label: est.label(),
            estimator: est.clone(),
            n_ok: ok.len(),
            n_failed,
            mean_alpha: stats::mean(&alphas),
            sd_alpha: spread(&alphas),
            mean_beta: stats::mean(&betas),
            sd_beta: spread(&betas),
            rmse_alpha: rmse(&alphas, at),
            rmse_beta: rmse(&betas, bt),
            rmse_mdl,
            eff_alpha: None,
            eff_beta: None,
            eff_mdl: None,
            raw: if design.keep_raw { ok } else { Vec::new() },
        });
    }
    let utopia = summaries
        .iter()
        .find(|s| s.estimator == Estimator::Utopian)
        .cloned()
        .expect("utopian estimator is always present");
    for s in &mut summaries {
        s.eff_alpha = efficiency(utopia.rmse_alpha, s.rmse_alpha);
        s.eff_beta = efficiency(utopia.rmse_beta, s.rmse_beta);
        s.eff_mdl = match (utopia.rmse_mdl, s.rmse_mdl) {
            (Some(u), Some(e)) => efficiency(u, e),
            _ => None,
        };
    }
    Ok(SimResult {
        design: design.clone(),
        mean_correlation,
        generated_lambda: design.generated_lambda(),
        estimators: summaries,
    })
}

fn efficiency(reference: f64, rmse: f64) -> Option<f64> {
    if rmse == reference {
        Some(100.0)
    } else if rmse > 0.0 {
        Some(100.0 * (reference / rmse).powi(2))
    } else {
        None
    }
}

impl SimResult {
    pub fn summary(&self, label: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.label == label)
    }

    /// CSV with one row per estimator: RMSE and efficiency for intercept,
    /// slope and the decision-level prediction.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "estimator,mean_r,rmse_intercept,eff_intercept,rmse_slope,eff_slope,rmse_mdl,eff_mdl\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for s in &self.estimators {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{:.6},{},{},{}",
                s.label,
                self.mean_correlation,
                s.rmse_alpha,
                opt(s.eff_alpha),
                s.rmse_beta,
                opt(s.eff_beta),
                opt(s.rmse_mdl),
                opt(s.eff_mdl)
            );
        }
        out
    }

    /// Fixed-width efficiency table for terminal output.
    pub fn table(&self) -> String {
        let mut out = format!("mean r {:.4}\n", self.mean_correlation);
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>6} {:>9} {:>6} {:>9} {:>6}",
            "estimator", "RMSE a", "eff", "RMSE b", "eff", "RMSE MDL", "eff"
        );
        let num = |v: Option<f64>, p: usize| match v {
            Some(x) => format!("{x:.p$}"),
            None => "-".into(),
        };
        for s in &self.estimators {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>6} {:>9.4} {:>6} {:>9} {:>6}",
                s.label,
                s.rmse_alpha,
                num(s.eff_alpha, 1),
                s.rmse_beta,
                num(s.eff_beta, 1),
                num(s.rmse_mdl, 4),
                num(s.eff_mdl, 1)
            );
        }
        out
    }
}
