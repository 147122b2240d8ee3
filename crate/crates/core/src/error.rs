use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock-space cutoff leaves more probability mass in the neglected
    /// tail than the requested budget allows.
    #[error("truncation too small for {what}: tail mass {tail:.3e} exceeds budget {budget:.3e} at dim {dim}")]
    TruncationTooSmall {
        what: &'static str,
        dim: usize,
        tail: f64,
        budget: f64,
    },

    #[error("backward transition probability underflowed ({0:e})")]
    ZeroBackwardProbability(f64),

    /// Zero-temperature baths have no finite Gibbs rescaling.
    #[error("bath at zero temperature (n_th = 0) has no Gibbs-rescaled backward process")]
    DegenerateBath,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The fitted Gaussian is being evaluated too far out in its tail to be
    /// trusted.
    #[error("evaluation point lies {distance:.2} fitted standard deviations from the fitted mean (limit {limit})")]
    NumericalUnderflow { distance: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
