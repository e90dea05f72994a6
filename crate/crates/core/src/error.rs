use thiserror::Error;

use crate::simulator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid memory kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gamma = {gamma} is outside the admissible range (0, {omega0})")]
    GammaOutOfRange { gamma: f64, omega0: f64 },

    #[error("modal roots violate the standing non-degeneracy assumptions: {0}")]
    DegenerateSpectrum(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("randomized actuator search failed after {attempts} attempts (seed {seed})")]
    SearchFailed { attempts: usize, seed: u64 },

    #[error("eigenvector transform is ill-conditioned (condition number {0:.3e})")]
    IllConditionedTransform(f64),

    #[error("controllability Gramian is singular: rank conditions fail")]
    GramianSingular,

    #[error("horizon too small: Gramian condition number {0:.3e} exceeds 1e14")]
    HorizonTooSmall(f64),

    #[error("shift gamma = {gamma} must satisfy 0 <= gamma < delta = {delta}")]
    GammaGeDelta { gamma: f64, delta: f64 },

    #[error("cost exponent alpha = {0} outside [0, 3/4]")]
    AlphaOutOfRange(f64),

    #[error("system is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("numerical solver failure: {0}")]
    SolverFailure(String),

    #[error("fitted decay rate {fitted:.6} is below the required {required:.6}")]
    DecayViolation {
        fitted: f64,
        required: f64,
        trajectory: Box<Trajectory>,
    },

    #[error("double modal root at lambda = {0}; use the ODE integrator instead")]
    DegenerateRoot(f64),

    #[error("integration step {step:.3e} exceeds stability bound {bound:.3e}")]
    StepInstability { step: f64, bound: f64 },

    #[error("forcing is not in the actuator range (relative residual {0:.3e})")]
    ForcingNotInRange(f64),

    #[error("decay-fit window holds {0} samples; at least 10 are required")]
    WindowTooShort(usize),

    #[error("kernel amplitude {0} is not positive (requires nu > kappa / lambda)")]
    NonpositiveAmplitude(f64),

    #[error("invalid mode count {0}")]
    InvalidCount(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
