use thiserror::Error;

/// Errors raised by the analysis, simulation and optimization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument or configuration field is outside its valid domain.
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A computation left the representable range (overflow, NaN).
    #[error("numeric range error in {context}: {detail}")]
    NumericRange { context: &'static str, detail: String },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn range(context: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericRange {
            context,
            detail: detail.into(),
        }
    }

    /// True for failures that originate in numerics rather than in the inputs.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Error::Domain { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
