use thiserror::Error;

/// Errors raised by estimation, testing, data generation and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WmstError {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid survival curve: {0}")]
    InvalidCurve(String),

    #[error("invalid window [{tau0}, {tau1}]: {reason}")]
    InvalidWindow { tau0: f64, tau1: f64, reason: String },

    #[error("integration bounds out of order: a = {a} > b = {b}")]
    BadBounds { a: f64, b: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("Greenwood variance undefined: row at t = {time} has r = d = {at_risk} while S(t) > 0")]
    GreenwoodUndefined { time: f64, at_risk: usize },

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("Turnbull EM did not converge after {iterations} iterations (last change {final_change:e})")]
    NotConverged { iterations: usize, final_change: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid hazard: {0}")]
    InvalidHazard(String),

    #[error("calibration infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl WmstError {
    /// True for failures that stem from the numbers rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            WmstError::GreenwoodUndefined { .. }
                | WmstError::DegenerateTest(_)
                | WmstError::NotConverged { .. }
                | WmstError::InfeasibleCalibration(_)
        )
    }
}

impl From<std::io::Error> for WmstError {
    fn from(e: std::io::Error) -> Self {
        WmstError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WmstError>;
