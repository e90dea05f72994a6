use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ModalSignal;
use crate::spectral::MemoryKernel;

/// Relative least-squares residual above which forcing is considered outside
/// the actuator range.
pub const RANGE_REL_TOL: f64 = 1e-10;

/// `amplitude * exp(-rate t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub rate: f64,
    pub amplitude: Vec<f64>,
}

/// Modal forcing `f_n(t) = f_e,n + sum_k a_k,n exp(-rho_k t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingField {
    pub f_e: Vec<f64>,
    #[serde(default)]
    pub transients: Vec<ForcingTerm>,
    /// Whether the forcing is declared to lie in the actuator range.
    #[serde(default)]
    pub in_range: bool,
}

impl ForcingField {
    pub fn constant(f_e: Vec<f64>) -> Self {
        Self {
            f_e,
            transients: Vec::new(),
            in_range: false,
        }
    }

    pub fn zero(k: usize) -> Self {
        Self::constant(vec![0.0; k])
    }

    pub fn with_transient(mut self, rate: f64, amplitude: Vec<f64>) -> Self {
        self.transients.push(ForcingTerm { rate, amplitude });
        self
    }

    pub fn modes(&self) -> usize {
        self.f_e.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.modes();
        if self.f_e.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("forcing limit must be finite".into()));
        }
        for term in &self.transients {
            if term.amplitude.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "forcing transient has {} modes, limit has {k}",
                    term.amplitude.len()
                )));
            }
            if !(term.rate.is_finite() && term.rate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "forcing decay rate {} must be positive",
                    term.rate
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::from_column_slice(&self.f_e);
        for term in &self.transients {
            let e = (-term.rate * t).exp();
            for (x, a) in v.iter_mut().zip(&term.amplitude) {
                *x += a * e;
            }
        }
        v
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.modes());
        for term in &self.transients {
            let e = -term.rate * (-term.rate * t).exp();
            for (x, a) in v.iter_mut().zip(&term.amplitude) {
                *x += a * e;
            }
        }
        v
    }

    /// Forcing truncated or zero-padded to `k` modes.
    pub fn resized(&self, k: usize) -> Self {
        let fit = |v: &[f64]| {
            let mut out = v.to_vec();
            out.resize(k, 0.0);
            out
        };
        Self {
            f_e: fit(&self.f_e),
            transients: self
                .transients
                .iter()
                .map(|t| ForcingTerm {
                    rate: t.rate,
                    amplitude: fit(&t.amplitude),
                })
                .collect(),
            in_range: self.in_range,
        }
    }
}

impl ModalSignal for ForcingField {
    fn value(&self, t: f64) -> DVector<f64> {
        ForcingField::value(self, t)
    }

    fn derivative(&self, t: f64) -> DVector<f64> {
        ForcingField::derivative(self, t)
    }
}

/// Per-mode steady state `y_e = f_e / (lambda (1 + b / delta))`.
pub fn steady_state(forcing: &ForcingField, lambdas: &[f64], kernel: &MemoryKernel) -> Result<DVector<f64>> {
    if forcing.modes() != lambdas.len() {
        return Err(Error::DimensionMismatch(format!(
            "forcing has {} modes, spectrum has {}",
            forcing.modes(),
            lambdas.len()
        )));
    }
    let factor = 1.0 + kernel.b / kernel.delta;
    Ok(DVector::from_iterator(
        lambdas.len(),
        forcing.f_e.iter().zip(lambdas).map(|(f, l)| f / (l * factor)),
    ))
}

/// Translated problem for `y - y_e`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslatedSystem {
    /// `g(t) + f(t) - f_e` with `g(t) = (b / delta) lambda y_e exp(-delta t)`.
    pub residual: ForcingField,
    pub y0: DVector<f64>,
}

pub fn translate_system(
    forcing: &ForcingField,
    y_e: &DVector<f64>,
    lambdas: &[f64],
    kernel: &MemoryKernel,
    y0: &DVector<f64>,
) -> Result<TranslatedSystem> {
    let k = forcing.modes();
    if y_e.len() != k || y0.len() != k || lambdas.len() != k {
        return Err(Error::DimensionMismatch("forcing, steady state and data differ in length".into()));
    }
    let g: Vec<f64> = lambdas
        .iter()
        .zip(y_e.iter())
        .map(|(l, y)| kernel.b / kernel.delta * l * y)
        .collect();
    let mut residual = ForcingField {
        f_e: vec![0.0; k],
        transients: forcing.transients.clone(),
        in_range: forcing.in_range,
    };
    if g.iter().any(|x| *x != 0.0) {
        residual.transients.push(ForcingTerm {
            rate: kernel.delta,
            amplitude: g,
        });
    }
    Ok(TranslatedSystem {
        residual,
        y0: y0 - y_e,
    })
}

/// Feedforward that cancels the residual forcing of the translated system:
/// `ff(t) = -f~(t) + (1 - c e^{-delta t}) f~~`, where `C f~(t) = f(t)`,
/// `C f~~ = f_e` and `c = b / (b + delta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingShift {
    /// Preimage of `f_e`.
    pub limit: DVector<f64>,
    /// Preimages of the transient amplitudes with their rates.
    pub transients: Vec<(f64, DVector<f64>)>,
    pub c: f64,
    pub delta: f64,
}

impl ForcingShift {
    pub fn feedforward(&self, t: f64) -> DVector<f64> {
        let mut out = -&self.limit * (self.c * (-self.delta * t).exp());
        for (rate, pre) in &self.transients {
            out -= pre * (-rate * t).exp();
        }
        out
    }

    /// `u1 = u~ + f~(t) - (1 - c e^{-delta t}) f~~`, the control that turns
    /// the translated problem into the homogeneous one.
    pub fn homogenizing(&self, t: f64, base: &DVector<f64>) -> DVector<f64> {
        base - self.feedforward(t)
    }
}

fn preimage(coefficients: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = target.norm();
    if scale == 0.0 {
        return Ok(DVector::zeros(coefficients.ncols()));
    }
    let svd = coefficients.clone().svd(true, true);
    let x = svd
        .solve(target, 1e-12 * svd.singular_values.max())
        .map_err(|e| Error::SolverFailure(e.to_string()))?;
    let residual = (coefficients * &x - target).norm() / scale;
    if residual > RANGE_REL_TOL {
        return Err(Error::ForcingNotInRange(residual));
    }
    Ok(x)
}

/// Builds the feedforward for a forcing field in the range of the modal
/// actuator matrix `C` (`K x M`).
pub fn shift_control_for_forcing(
    forcing: &ForcingField,
    kernel: &MemoryKernel,
    coefficients: &DMatrix<f64>,
) -> Result<ForcingShift> {
    forcing.validate()?;
    if coefficients.nrows() != forcing.modes() {
        return Err(Error::DimensionMismatch(format!(
            "actuator matrix has {} rows, forcing has {} modes",
            coefficients.nrows(),
            forcing.modes()
        )));
    }
    let limit = preimage(coefficients, &DVector::from_column_slice(&forcing.f_e))?;
    let transients = forcing
        .transients
        .iter()
        .map(|t| Ok((t.rate, preimage(coefficients, &DVector::from_column_slice(&t.amplitude))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForcingShift {
        limit,
        transients,
        c: kernel.b / (kernel.b + kernel.delta),
        delta: kernel.delta,
    })
}
