use nalgebra::{DMatrix, DVector};

use crate::simulator::ForcingShift;
use crate::synthesis::NullControl;

/// A modal input signal `u_n(t)` with its time derivative.
pub trait ModalSignal {
    fn value(&self, t: f64) -> DVector<f64>;
    fn derivative(&self, t: f64) -> DVector<f64>;
}

/// Identically zero input on `K` modes.
#[derive(Clone, Copy, Debug)]
pub struct ZeroSignal(pub usize);

impl ModalSignal for ZeroSignal {
    fn value(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.0)
    }

    fn derivative(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.0)
    }
}

/// Signal from closures.
pub struct FnSignal<F, G> {
    pub value: F,
    pub derivative: G,
}

impl<F, G> ModalSignal for FnSignal<F, G>
where
    F: Fn(f64) -> DVector<f64>,
    G: Fn(f64) -> DVector<f64>,
{
    fn value(&self, t: f64) -> DVector<f64> {
        (self.value)(t)
    }

    fn derivative(&self, t: f64) -> DVector<f64> {
        (self.derivative)(t)
    }
}

/// A controller with optional internal state `xi`, integrated jointly with
/// the modal state.
pub trait Controller {
    fn state_dim(&self) -> usize {
        0
    }

    fn initial_state(&self) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }

    /// Modal input `u_n` (length `K`).
    fn input(&self, t: f64, alpha: &DVector<f64>, z: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64>;

    /// `xi'` given the modal velocity.
    fn rhs(&self, _t: f64, _alpha: &DVector<f64>, _alpha_dot: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(xi.len())
    }

    fn channel_labels(&self) -> Vec<String> {
        Vec::new()
    }

    /// Recorded control channels.
    fn record(&self, _t: f64, _alpha: &DVector<f64>, _z: &DVector<f64>, _xi: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroControl(pub usize);

impl Controller for ZeroControl {
    fn input(&self, _t: f64, _a: &DVector<f64>, _z: &DVector<f64>, _xi: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.0)
    }
}

/// Open-loop modal input.
pub struct OpenLoop<'a>(pub &'a dyn ModalSignal);

impl Controller for OpenLoop<'_> {
    fn input(&self, t: f64, _a: &DVector<f64>, _z: &DVector<f64>, _xi: &DVector<f64>) -> DVector<f64> {
        self.0.value(t)
    }
}

/// Plays back the physical null control `u = C v(t)`.
pub struct NullControlPlayback {
    pub control: NullControl,
    /// `K x M`.
    pub coefficients: DMatrix<f64>,
}

impl Controller for NullControlPlayback {
    fn input(&self, t: f64, _a: &DVector<f64>, _z: &DVector<f64>, _xi: &DVector<f64>) -> DVector<f64> {
        &self.coefficients * self.control.v_at(t)
    }

    fn channel_labels(&self) -> Vec<String> {
        (1..=self.control.inputs()).map(|i| format!("v_{i}")).collect()
    }

    fn record(&self, t: f64, _a: &DVector<f64>, _z: &DVector<f64>, _xi: &DVector<f64>) -> DVector<f64> {
        self.control.v_at(t)
    }
}

/// Dynamic state feedback: `v' = -delta v + w`, `u = C (v + ff(t))`, with
/// `w = -G_p (alpha - y_e) - G_v alpha'` on the first `Kg` modes.
#[derive(Clone, Debug)]
pub struct FeedbackController {
    /// `M x Kg`.
    pub gain_position: DMatrix<f64>,
    /// `M x Kg`.
    pub gain_velocity: DMatrix<f64>,
    /// `K x M`.
    pub coefficients: DMatrix<f64>,
    pub delta: f64,
    /// Steady state subtracted from `alpha` (length `K`).
    pub reference: Option<DVector<f64>>,
    pub shift: Option<ForcingShift>,
    pub v0: DVector<f64>,
}

impl FeedbackController {
    pub fn new(
        gain_position: DMatrix<f64>,
        gain_velocity: DMatrix<f64>,
        coefficients: DMatrix<f64>,
        delta: f64,
    ) -> Self {
        let m = coefficients.ncols();
        Self {
            gain_position,
            gain_velocity,
            coefficients,
            delta,
            reference: None,
            shift: None,
            v0: DVector::zeros(m),
        }
    }

    pub fn with_reference(mut self, y_e: DVector<f64>) -> Self {
        self.reference = Some(y_e);
        self
    }

    pub fn with_shift(mut self, shift: ForcingShift) -> Self {
        self.shift = Some(shift);
        self
    }

    pub fn inputs(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn block(&self) -> usize {
        self.gain_position.ncols()
    }

    /// `w` for given modal position and velocity.
    pub fn auxiliary(&self, alpha: &DVector<f64>, alpha_dot: &DVector<f64>) -> DVector<f64> {
        let kg = self.block();
        let mut pos = alpha.rows(0, kg).into_owned();
        if let Some(r) = &self.reference {
            pos -= r.rows(0, kg);
        }
        -(&self.gain_position * pos + &self.gain_velocity * alpha_dot.rows(0, kg))
    }

    fn actuator(&self, t: f64, v: &DVector<f64>) -> DVector<f64> {
        match &self.shift {
            Some(s) => v + s.feedforward(t),
            None => v.clone(),
        }
    }
}

impl Controller for FeedbackController {
    fn state_dim(&self) -> usize {
        self.inputs()
    }

    fn initial_state(&self) -> DVector<f64> {
        self.v0.clone()
    }

    fn input(&self, t: f64, _a: &DVector<f64>, _z: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        &self.coefficients * self.actuator(t, xi)
    }

    fn rhs(&self, _t: f64, alpha: &DVector<f64>, alpha_dot: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        self.auxiliary(alpha, alpha_dot) - xi * self.delta
    }

    fn channel_labels(&self) -> Vec<String> {
        (1..=self.inputs()).map(|i| format!("u_{i}")).collect()
    }

    fn record(&self, t: f64, _a: &DVector<f64>, _z: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        self.actuator(t, xi)
    }
}
