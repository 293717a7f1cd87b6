use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid precision profile: {0}")]
    InvalidProfile(String),

    /// The dataset does not satisfy an operation's preconditions.
    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations (last alpha {alpha}, beta {beta})")]
    NonConvergence {
        iterations: usize,
        alpha: f64,
        beta: f64,
    },

    /// A leave-one-out refit failed.
    #[error("jackknife refit without sample {index} failed: {source}")]
    Inference {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A refit inside the outlier procedure failed.
    #[error("outlier procedure failed at {stage}: {source}")]
    OutlierStage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("simulation: {0}")]
    Simulation(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_)
                | Error::RankDeficient(_)
                | Error::NonConvergence { .. }
                | Error::Inference { .. }
                | Error::OutlierStage { .. }
                | Error::Consistency(_)
        )
    }
}
