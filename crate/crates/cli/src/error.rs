use pidectl_core::Error;
use thiserror::Error as ThisError;

/// Pipeline failure with a process exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("rank failure: {0}")]
    Rank(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("certification failed: {0}")]
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Rank(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Certification(_) => 5,
        }
    }

    pub fn config(field: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }
}

/// Short machine tag for a core error.
pub fn error_tag(e: &Error) -> &'static str {
    match e {
        Error::InvalidSpectrum(_) => "invalid_spectrum",
        Error::InvalidKernel(_) => "invalid_kernel",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::GammaOutOfRange { .. } => "gamma_out_of_range",
        Error::DegenerateSpectrum(_) => "degenerate_spectrum",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::SearchFailed { .. } => "search_failed",
        Error::IllConditionedTransform(_) => "ill_conditioned",
        Error::GramianSingular => "gramian_singular",
        Error::HorizonTooSmall(_) => "horizon_too_small",
        Error::GammaGeDelta { .. } => "gamma_ge_delta",
        Error::AlphaOutOfRange(_) => "alpha_out_of_range",
        Error::NotStabilizable(_) => "not_stabilizable",
        Error::SolverFailure(_) => "solver_failure",
        Error::DecayViolation { .. } => "decay_violation",
        Error::DegenerateRoot(_) => "degenerate_root",
        Error::StepInstability { .. } => "step_instability",
        Error::ForcingNotInRange(_) => "forcing_not_in_range",
        Error::WindowTooShort(_) => "window_too_short",
        Error::NonpositiveAmplitude(_) => "nonpositive_amplitude",
        Error::InvalidCount(_) => "invalid_count",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = format!("{}: {e}", error_tag(&e));
        match e {
            Error::SearchFailed { .. } | Error::GramianSingular | Error::NotStabilizable(_) => {
                CliError::Rank(msg)
            }
            Error::IllConditionedTransform(_)
            | Error::HorizonTooSmall(_)
            | Error::SolverFailure(_)
            | Error::DegenerateRoot(_)
            | Error::StepInstability { .. } => CliError::Solver(msg),
            Error::DecayViolation { .. } => CliError::Certification(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
