use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network is disconnected into {} components: {}", .components.len(), format_components(.components))]
    Disconnected { components: Vec<Vec<String>> },

    #[error("duplicate line between `{from}` and `{to}`")]
    DuplicateLine { from: String, to: String },

    #[error("zero-injection block is singular; offending island: [{}]", .island.join(", "))]
    SingularZeroBlock { island: Vec<String> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("power flow did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("power-flow Jacobian singular at iteration {iteration}; operating point is at or beyond the voltage stability limit")]
    SingularJacobian { iteration: usize },

    #[error("Jacobian is singular at the supplied voltage")]
    SingularAtPoint,

    #[error("truncated sampler acceptance rate {rate:.3e} is below {threshold:.1e}; widen the load margins")]
    AcceptanceTooLow { rate: f64, threshold: f64 },

    #[error("admissibility condition alpha < 1/4 violated (alpha = {alpha:.6})")]
    Inadmissible { alpha: f64 },

    #[error("minimum load margin must be positive, got {p_min}")]
    UnboundedSensitivity { p_min: f64 },

    #[error("covariance is near singular (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("closed-form bound denominator is not positive ({denominator:.6}); use Monte Carlo calibration instead")]
    NonPositiveDenominator { denominator: f64 },

    #[error("implied active load at bus `{bus}`, step {step} is not positive ({value:.3e}); the adjacent matrix leaves the loading envelope")]
    NonPositiveImpliedLoad { bus: String, step: usize, value: f64 },

    #[error("numerical null space of the consistency constraints is empty")]
    EmptyNullSpace,

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by malformed or inconsistent inputs, as opposed to
    /// numerical failures during a solve.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Disconnected { .. }
                | Error::DuplicateLine { .. }
                | Error::DimensionMismatch { .. }
                | Error::UnboundedSensitivity { .. }
                | Error::EmptySample
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }

    pub fn is_inadmissible(&self) -> bool {
        matches!(self, Error::Inadmissible { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("[{}]", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}
