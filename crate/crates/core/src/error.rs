use thiserror::Error;

/// Errors raised by the numerical kernels and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("radius {r} outside tabulated range [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureNonConvergence { tol: f64, err: f64 },
    #[error("root bracketing failed: {0}")]
    Bracket(String),
    #[error("coordinate point too close to a hyperspherical pole")]
    PoleProximity,
    #[error("metric inverse is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("finite-difference cancellation: step and half-step estimates differ by {mismatch:e} (budget {budget:e})")]
    Cancellation { mismatch: f64, budget: f64 },
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("grid window too small: minimizing path touches the boundary")]
    WindowTooSmall,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("T_max too small: bound 2*pi*l*h(T_max) = {bound} exceeds epsilon = {epsilon}")]
    TmaxTooSmall { bound: f64, epsilon: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("artifact format error: {0}")]
    Format(String),
}

impl Error {
    /// Input errors map to exit code 1, numerical failures to exit code 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::InvalidArgument(_)
                | Error::Unsupported(_)
                | Error::NotApplicable(_)
                | Error::TmaxTooSmall { .. }
                | Error::Config(_)
                | Error::Io(_)
                | Error::Format(_)
                | Error::PoleProximity
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::OutOfRange { .. } => "out_of_range",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::InvariantViolation(_) => "invariant_violation",
            Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            Error::Bracket(_) => "bracket",
            Error::PoleProximity => "pole_proximity",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Cancellation { .. } => "cancellation",
            Error::Unsupported(_) => "unsupported",
            Error::WindowTooSmall => "window_too_small",
            Error::NotApplicable(_) => "not_applicable",
            Error::TmaxTooSmall { .. } => "t_max_too_small",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(x: f64, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}
