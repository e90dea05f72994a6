//! Scenario-driven front end: analyze, synthesize, simulate and certify.

pub mod commands;
pub mod error;
pub mod scenario;

pub use commands::{analyze, certify, load_controller, simulate, synthesize};
pub use error::{CliError, CliResult};
pub use scenario::Scenario;
