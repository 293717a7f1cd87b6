//! Sequential outlier identification: trim the largest scaled residual `K`
//! times, then bring suspects back one at a time while their Bonferroni
//! P values are not significant.

use serde::{Deserialize, Serialize};

use crate::data::MCDataset;
use crate::diagnostics::{fit_residual_profile, residuals};
use crate::profiles::PrecisionProfile;
use crate::error::{Error, Result};
use crate::inference::{Fitter, LineFit};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierOptions {
    /// Trim budget `K`; `None` means `max(1, ceil(0.05 n))`.
    pub k_max: Option<usize>,
    pub alpha_level: f64,
}

impl Default for OutlierOptions {
    fn default() -> Self {
        Self {
            k_max: None,
            alpha_level: 0.05,
        }
    }
}

pub fn default_k_max(n: usize) -> usize {
    ((0.05 * n as f64).ceil() as usize).max(1)
}

/// A case set aside in the forward pass, with its scaled residual at the
/// stage it was removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trimmed {
    pub index: usize,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspectTest {
    pub index: usize,
    /// Predicted residual scaled by the clean cases' residual profile.
    pub z: f64,
    pub p: f64,
    pub bonferroni_p: f64,
}

/// One backward stage: every current suspect tested against the clean set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardStep {
    /// Size of the clean set, which is also the Bonferroni multiplier.
    pub clean_n: usize,
    pub tests: Vec<SuspectTest>,
    /// The suspect returned to the clean set, or `None` when the remaining
    /// suspects were all declared outliers.
    pub reincluded: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub k_max: usize,
    pub alpha_level: f64,
    pub forward_trace: Vec<Trimmed>,
    pub backward_trace: Vec<BackwardStep>,
    pub outliers: Vec<SuspectTest>,
    /// Fit on all cases except the declared outliers.
    pub clean_fit: LineFit,
}

impl OutlierReport {
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.outliers.iter().map(|o| o.index).collect()
    }
}

fn stage_error(stage: String) -> impl FnOnce(Error) -> Error {
    move |e| Error::OutlierStage {
        stage,
        source: Box::new(e),
    }
}

/// Largest absolute scaled residual, ties to the lower index.
fn most_extreme(data: &MCDataset, fit: &LineFit) -> Result<Trimmed> {
    let res = residuals(data, fit)?;
    let mut best: Option<Trimmed> = None;
    for (s, &r) in data.samples().iter().zip(&res.r) {
        let better = match best {
            None => true,
            Some(b) => r.abs() > b.z.abs() || (r.abs() == b.z.abs() && s.index < b.index),
        };
        if better {
            best = Some(Trimmed { index: s.index, z: r });
        }
    }
    Ok(best.expect("dataset is non-empty"))
}

/// Variance profiles of the two methods under `fit`.
fn fitted_profiles(fit: &LineFit) -> Result<(PrecisionProfile, PrecisionProfile)> {
    match fit {
        LineFit::Known(f) => Ok((f.profile_x, f.profile_y)),
        LineFit::Rl(f) => Ok((f.profile().scale(f.lambda)?, f.profile())),
    }
}

/// Raw residual variance with the profiles evaluated at the observed `x`.
///
/// A contaminated `y` leaves `x` untouched, so the scale of a suspect does
/// not follow its own discrepancy.
fn variance_at_x(gx: &PrecisionProfile, hy: &PrecisionProfile, alpha: f64, beta: f64, x: f64) -> f64 {
    hy.at(alpha + beta * x) + beta * beta * gx.at(x)
}

/// Tests each suspect against the fit and residual profile of `clean`.
///
/// Clean and held-out residuals are scaled by the same variance function.
fn test_suspects(
    data: &MCDataset,
    clean: &MCDataset,
    fit: &LineFit,
    suspects: &[usize],
) -> Result<Vec<SuspectTest>> {
    let (gx, hy) = fitted_profiles(fit)?;
    let (a, b) = (fit.alpha(), fit.beta());
    let mut r = Vec::with_capacity(clean.n());
    for s in clean.samples() {
        let var = variance_at_x(&gx, &hy, a, b, s.x);
        if !(var > 0.0) {
            return Err(Error::degenerate(format!("residual variance of sample {} is {var}", s.index)));
        }
        r.push((s.y - a - b * s.x) / var.sqrt());
    }
    // Clean residuals that vanish identically leave nothing to fit; scaled
    // residuals then keep their nominal unit scale.
    let profile = if r.iter().all(|&v| v == 0.0) {
        None
    } else {
        Some(fit_residual_profile(&clean.xs(), &r)?)
    };
    let multiplier = clean.n() as f64;
    suspects
        .iter()
        .map(|&index| {
            let s = data.get(index).expect("suspect comes from the data");
            let var = variance_at_x(&gx, &hy, a, b, s.x);
            let sd = profile.as_ref().map_or(1.0, |p| p.sd_at(s.x));
            if !(var > 0.0) || !(sd > 0.0) {
                return Err(Error::degenerate(format!(
                    "cannot scale the predicted residual of sample {index}"
                )));
            }
            let z = (s.y - a - b * s.x) / var.sqrt() / sd;
            let p = stats::norm_two_sided_p(z);
            Ok(SuspectTest {
                index,
                z,
                p,
                bonferroni_p: (multiplier * p).min(1.0),
            })
        })
        .collect()
}

pub fn detect_outliers(data: &MCDataset, fitter: &Fitter, opts: &OutlierOptions) -> Result<OutlierReport> {
    let n = data.n();
    let k = opts.k_max.unwrap_or_else(|| default_k_max(n));
    if k < 1 {
        return Err(Error::domain("the trim budget must be at least 1"));
    }
    if n < k + 5 {
        return Err(Error::data(format!(
            "trimming {k} of {n} samples leaves fewer than 5"
        )));
    }
    if !(opts.alpha_level > 0.0 && opts.alpha_level < 1.0) {
        return Err(Error::domain(format!(
            "alpha level must lie in (0, 1), got {}",
            opts.alpha_level
        )));
    }

    let mut fit = fitter.fit(data).map_err(stage_error("forward fit on all samples".into()))?;
    let mut suspects: Vec<usize> = Vec::with_capacity(k);
    let mut forward_trace = Vec::with_capacity(k);
    for stage in 1..=k {
        let current = data.excluding(&suspects)?;
        let worst = most_extreme(&current, &fit)
            .map_err(stage_error(format!("forward stage {stage} scaling")))?;
        forward_trace.push(worst);
        suspects.push(worst.index);
        let remaining = data.excluding(&suspects)?;
        fit = fitter
            .refit(&remaining, &fit)
            .map_err(stage_error(format!("forward refit after trimming {stage}")))?;
    }

    let mut backward_trace = Vec::new();
    let mut outliers = Vec::new();
    while !suspects.is_empty() {
        let clean = data.excluding(&suspects)?;
        let stage = format!("backward stage with {} clean samples", clean.n());
        let tests = test_suspects(data, &clean, &fit, &suspects).map_err(stage_error(stage.clone()))?;
        // Largest Bonferroni P; ties go to the case trimmed last.
        let worst = tests
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.bonferroni_p.total_cmp(&b.1.bonferroni_p).then(a.0.cmp(&b.0)))
            .map(|(_, t)| *t)
            .expect("suspects are non-empty");
        if worst.bonferroni_p < opts.alpha_level {
            outliers = tests.clone();
            backward_trace.push(BackwardStep {
                clean_n: clean.n(),
                tests,
                reincluded: None,
            });
            break;
        }
        backward_trace.push(BackwardStep {
            clean_n: clean.n(),
            tests,
            reincluded: Some(worst.index),
        });
        suspects.retain(|&i| i != worst.index);
        let clean = data.excluding(&suspects)?;
        fit = fitter
            .refit(&clean, &fit)
            .map_err(stage_error(format!("backward refit reincluding {}", worst.index)))?;
    }

    Ok(OutlierReport {
        k_max: k,
        alpha_level: opts.alpha_level,
        forward_trace,
        backward_trace,
        outliers,
        clean_fit: fit,
    })
}
