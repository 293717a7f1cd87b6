pub mod baselines;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod known;
pub mod optim;
pub mod outliers;
pub mod profiles;
pub mod rl;
pub mod simlab;
pub mod stats;

pub use baselines::{linnet_ccv, ml_constant_cv, passing_bablok, BaselineFit, BaselineMethod};
pub use data::{MCDataset, PairedSample};
pub use error::{Error, Result};
pub use diagnostics::{fit_residual_profile, qq_normality, residuals, ResidualProfileFit, ResidualSet};
pub use inference::{jackknife, predict, Fitter, InferenceResult, LineFit, Prediction};
pub use known::{fit_known, latent_mu, DemingFit};
pub use outliers::{detect_outliers, OutlierOptions, OutlierReport};
pub use profiles::{Family, PrecisionProfile};
pub use rl::{fit_rl, RlFit};
pub use simlab::{generate, run_study, Estimator, SimDesign, SimResult};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/known-profiles.md")]
    mod known_profiles {}
    #[doc = include_str!("../../../book/src/standalone.md")]
    mod standalone {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/outliers.md")]
    mod outliers {}
    #[doc = include_str!("../../../book/src/comparators.md")]
    mod comparators {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
