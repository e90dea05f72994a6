//! Modal simulation of open- and closed-loop trajectories.

mod controllers;
mod exact;
mod fit;
mod forcing;
mod ode;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{MemoryKernel, Spectrum};

pub use controllers::{
    Controller, FeedbackController, FnSignal, ModalSignal, NullControlPlayback, OpenLoop,
    ZeroControl, ZeroSignal,
};
pub use exact::simulate_exact;
pub use fit::{fit_decay_rate, fit_norms, DecayFit, MIN_FIT_SAMPLES};
pub use forcing::{
    shift_control_for_forcing, steady_state, translate_system, ForcingField, ForcingShift,
    ForcingTerm, TranslatedSystem, RANGE_REL_TOL,
};
pub use ode::{default_step, simulate_ode, RK4_STABILITY_BOUND};

/// First `K` modes of a spectrum together with the kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalModel {
    pub lambdas: Vec<f64>,
    pub kernel: MemoryKernel,
}

impl ModalModel {
    pub fn new(lambdas: Vec<f64>, kernel: MemoryKernel) -> Result<Self> {
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidSpectrum("modal eigenvalues must be positive".into()));
        }
        Ok(Self { lambdas, kernel })
    }

    pub fn from_spectrum(spectrum: &Spectrum, kernel: &MemoryKernel, k: usize) -> Result<Self> {
        if k == 0 || k > spectrum.mode_count() {
            return Err(Error::InvalidCount(k));
        }
        Self::new(spectrum.mode_eigenvalues(k), *kernel)
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }
}

/// Integration horizon and sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub t_max: f64,
    /// Integration step; `None` uses [`default_step`].
    pub step: Option<f64>,
    /// Record every `stride`-th step; `None` keeps at most about 2000 samples.
    pub stride: Option<usize>,
    /// Exponent `a` of the certified norms `|A^{a - 1/2} y|` and `|A^a y|`.
    pub cost_exponent: f64,
}

impl SimOptions {
    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            step: None,
            stride: None,
            cost_exponent: 0.5,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self
    }

    pub fn with_cost_exponent(mut self, a: f64) -> Self {
        self.cost_exponent = a;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `|y|`.
    State,
    /// `|A^{a - 1/2} y|`.
    Half,
    /// `|A^a y|`.
    Full,
}

/// Sampled modal trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub cost_exponent: f64,
    /// `K x samples`.
    pub alpha: DMatrix<f64>,
    /// `K x samples`.
    pub z: DMatrix<f64>,
    /// `channels x samples`.
    pub controls: DMatrix<f64>,
    pub control_labels: Vec<String>,
    /// Integration step actually used.
    pub step: f64,
    /// How many times the requested step was halved for stability.
    pub halvings: u32,
}

impl Trajectory {
    pub fn samples(&self) -> usize {
        self.grid.len()
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.alpha.column(k).into_owned()
    }

    /// `sqrt(sum lambda^{2s} alpha^2)` at sample `k`.
    pub fn weighted_norm(&self, k: usize, s: f64) -> f64 {
        self.lambdas
            .iter()
            .zip(self.alpha.column(k).iter())
            .map(|(l, a)| l.powf(2.0 * s) * a * a)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_exponent(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::State => 0.0,
            NormKind::Half => self.cost_exponent - 0.5,
            NormKind::Full => self.cost_exponent,
        }
    }

    pub fn norms(&self, kind: NormKind) -> Vec<f64> {
        let s = self.norm_exponent(kind);
        (0..self.samples()).map(|k| self.weighted_norm(k, s)).collect()
    }

    /// `int e^{2 gamma t} |A^a y|^2 dt` over the sampled horizon.
    pub fn weighted_integral(&self, gamma: f64) -> f64 {
        let vals: Vec<f64> = self
            .norms(NormKind::Full)
            .iter()
            .zip(&self.grid)
            .map(|(n, t)| (2.0 * gamma * t).exp() * n * n)
            .collect();
        crate::linalg::integrate_samples(&self.grid, &vals)
    }

    /// Columns: `t`, `alpha_n`, `z_n`, controls, `norm_y`, `norm_half`, `norm_full`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let k = self.modes();
        let mut header = vec!["t".to_string()];
        header.extend((1..=k).map(|i| format!("alpha_{i}")));
        header.extend((1..=k).map(|i| format!("z_{i}")));
        header.extend(self.control_labels.iter().cloned());
        header.extend(["norm_y", "norm_half", "norm_full"].map(String::from));
        let ny = self.norms(NormKind::State);
        let nh = self.norms(NormKind::Half);
        let nf = self.norms(NormKind::Full);
        let rows = (0..self.samples()).map(|s| {
            let mut row = vec![self.grid[s]];
            row.extend(self.alpha.column(s).iter());
            row.extend(self.z.column(s).iter());
            row.extend(self.controls.column(s).iter());
            row.extend([ny[s], nh[s], nf[s]]);
            row
        });
        crate::io::write_csv(path, &header, rows)
    }

    /// Plot data: `t`, `log|y|`, `log|A^{a-1/2} y|`, `log|A^a y|`.
    pub fn write_decay_csv(&self, path: &Path) -> Result<()> {
        let header = ["t", "log_norm_y", "log_norm_half", "log_norm_full"].map(String::from);
        let log = |x: f64| x.max(1e-300).ln();
        let ny = self.norms(NormKind::State);
        let nh = self.norms(NormKind::Half);
        let nf = self.norms(NormKind::Full);
        let rows = (0..self.samples()).map(|s| vec![self.grid[s], log(ny[s]), log(nh[s]), log(nf[s])]);
        crate::io::write_csv(path, &header, rows)
    }

    /// Largest absolute difference of the modal coefficients.
    pub fn max_difference(&self, other: &Trajectory) -> f64 {
        (&self.alpha - &other.alpha).amax()
    }
}
