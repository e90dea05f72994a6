//! Spectral synthesis and certification of finite-dimensional feedback
//! controllers for parabolic integro-differential equations with an
//! exponential memory kernel.

pub mod error;
pub mod fluids;
pub mod io;
pub mod linalg;
pub mod riccati;
pub mod simulator;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
pub use spectral::{
    beta_eval, check_degeneracy, growth_bound, modal_roots, partition_spectrum, MemoryKernel,
    ModalRootPair, Spectrum, SpectrumEntry, UnstablePartition,
};
