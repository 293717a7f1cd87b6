use serde::{Deserialize, Serialize};

use pwdeming::baselines::{passing_bablok, BaselineFit};
use pwdeming::diagnostics::{fit_residual_profile, qq_correlation, residuals_at, QqReference, ResidualProfileFit, ResidualSet, QQ_DRAWS};
use pwdeming::inference::{jackknife_at, predict, Fitter, InferenceResult, LineFit, Prediction};
use pwdeming::outliers::{detect_outliers, OutlierOptions, OutlierReport};
use pwdeming::{stats, MCDataset};

use crate::Failure;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqSummary {
    pub correlation: f64,
    pub p_value: f64,
    pub draws: usize,
}

/// Everything needed to repeat the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub fitter: Fitter,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_options: Option<OutlierOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub input: InputSummary,
    pub fit: LineFit,
    pub inference: InferenceResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    pub residuals: ResidualSet,
    /// Absent when the scaled residuals vanish or some `x` is not positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_profile: Option<ResidualProfileFit>,
    /// Absent for fewer than 10 samples or constant residuals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qq: Option<QqSummary>,
    /// Comparator fit, present for 10 or more samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passing_bablok: Option<BaselineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outliers: Option<OutlierReport>,
    pub provenance: Provenance,
}

pub struct FitRequest {
    pub source: String,
    pub fitter: Fitter,
    pub level: f64,
    pub mdl: Option<f64>,
    pub outliers: Option<OutlierOptions>,
    pub seed: u64,
}

pub fn analyse(data: &MCDataset, req: &FitRequest) -> Result<AnalysisReport, Failure> {
    if data.n() < 5 {
        return Err(Failure::Data(format!("need at least 5 samples, got {}", data.n())));
    }
    let (xs, ys) = (data.xs(), data.ys());
    let fit = req.fitter.fit(data)?;
    let inference = jackknife_at(data, &req.fitter, req.level)?;
    let prediction = req.mdl.map(|x0| predict(&inference, x0)).transpose()?;
    let residuals = residuals_at(data, &fit, req.level)?;
    let residual_profile = if xs.iter().all(|&x| x > 0.0) && residuals.r.iter().any(|&r| r != 0.0) {
        Some(fit_residual_profile(&xs, &residuals.r)?)
    } else {
        None
    };
    let qq = match qq_correlation(&residuals.r) {
        Ok(correlation) if data.n() >= 10 => {
            let reference = QqReference::new(data.n(), QQ_DRAWS, req.seed)?;
            Some(QqSummary {
                correlation,
                p_value: reference.p_value(&residuals.r)?,
                draws: QQ_DRAWS,
            })
        }
        _ => None,
    };
    let passing_bablok = if data.n() >= 10 {
        Some(passing_bablok(data, req.level)?)
    } else {
        None
    };
    let outliers = req
        .outliers
        .map(|opts| detect_outliers(data, &req.fitter, &opts))
        .transpose()?;
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        input: InputSummary {
            source: req.source.clone(),
            n: data.n(),
            pearson: stats::pearson(&xs, &ys),
            spearman: stats::spearman(&xs, &ys),
        },
        fit,
        inference,
        prediction,
        residuals,
        residual_profile,
        qq,
        passing_bablok,
        outliers,
        provenance: Provenance {
            tool: "pwdeming".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: req.seed,
            fitter: req.fitter,
            level: req.level,
            mdl: req.mdl,
            outlier_options: req.outliers,
        },
    })
}
