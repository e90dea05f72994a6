use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{GL8_NODES, GL8_WEIGHTS};
use crate::simulator::{ModalModel, ModalSignal, Trajectory};
use crate::spectral::modal_roots;

/// Per-mode response functions in real form.
struct Mode {
    plus: Complex64,
    minus: Complex64,
    real: bool,
}

impl Mode {
    /// Impulse response `h` with `h(0) = 0`, `h'(0) = 1`.
    fn h(&self, t: f64) -> f64 {
        if self.real {
            let (p, m) = (self.plus.re, self.minus.re);
            ((-m * t).exp() - (-p * t).exp()) / (p - m)
        } else {
            let (s, w) = (self.plus.re, self.plus.im);
            (-s * t).exp() * (w * t).sin() / w
        }
    }

    /// Free response `c` with `c(0) = 1`, `c'(0) = 0`.
    fn c(&self, t: f64) -> f64 {
        if self.real {
            let (p, m) = (self.plus.re, self.minus.re);
            (p * (-m * t).exp() - m * (-p * t).exp()) / (p - m)
        } else {
            let (s, w) = (self.plus.re, self.plus.im);
            (-s * t).exp() * ((w * t).cos() + s / w * (w * t).sin())
        }
    }

    /// `int_0^t h(t - s) q(s) ds` from the running integrals
    /// `J^pm = int_0^t e^{-mu^pm (t - s)} q(s) ds`.
    fn convolution(&self, j_plus: Complex64, j_minus: Complex64) -> f64 {
        ((j_minus - j_plus) / (self.plus - self.minus)).re
    }
}

/// Closed-form modal solution: `alpha = c a0 + h alpha'(0) + h * g` with
/// `alpha'(0) = u(0) - lambda a0`, `g = u' + delta u`, and the memory
/// variable `z = h a0 + h * u`. Convolutions are advanced recursively with
/// Gauss-Legendre sub-cells no longer than `0.5 / |mu^+|`.
pub fn simulate_exact(
    model: &ModalModel,
    y0: &DVector<f64>,
    signal: &dyn ModalSignal,
    grid: &[f64],
) -> Result<Trajectory> {
    let k = model.modes();
    if y0.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "initial data has {} modes, model has {k}",
            y0.len()
        )));
    }
    if grid.is_empty() || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must start at 0 and increase".into()));
    }
    let delta = model.kernel.delta;
    let mut modes = Vec::with_capacity(k);
    for &l in &model.lambdas {
        let r = modal_roots(l, &model.kernel);
        if r.is_degenerate {
            return Err(Error::DegenerateRoot(l));
        }
        modes.push(Mode {
            plus: r.mu_plus,
            minus: r.mu_minus,
            real: r.is_real,
        });
    }
    let fastest = modes.iter().map(|m| m.plus.norm()).fold(0.0, f64::max);
    let max_cell = if fastest > 0.0 { 0.5 / fastest } else { f64::INFINITY };

    let u0 = signal.value(0.0);
    let v0: Vec<f64> = (0..k).map(|n| u0[n] - model.lambdas[n] * y0[n]).collect();

    // Running integrals per mode: [J_g^+, J_g^-, J_u^+, J_u^-].
    let mut acc = vec![[Complex64::new(0.0, 0.0); 4]; k];
    let mut alpha = DMatrix::zeros(k, grid.len());
    let mut z = DMatrix::zeros(k, grid.len());
    for n in 0..k {
        alpha[(n, 0)] = y0[n];
    }
    for s in 1..grid.len() {
        let (t0, t1) = (grid[s - 1], grid[s]);
        let cells = ((t1 - t0) / max_cell).ceil().max(1.0) as usize;
        let h = (t1 - t0) / cells as f64;
        for c in 0..cells {
            let a = t0 + c as f64 * h;
            let b = a + h;
            let samples: Vec<(f64, f64, DVector<f64>, DVector<f64>)> = GL8_NODES
                .iter()
                .zip(GL8_WEIGHTS.iter())
                .map(|(x, w)| {
                    let t = a + 0.5 * h * (1.0 + x);
                    (t, 0.5 * h * w, signal.value(t), signal.derivative(t))
                })
                .collect();
            for (n, mode) in modes.iter().enumerate() {
                for (slot, mu) in [(0, mode.plus), (1, mode.minus)] {
                    let decay = (-mu * h).exp();
                    let mut ig = Complex64::new(0.0, 0.0);
                    let mut iu = Complex64::new(0.0, 0.0);
                    for (t, w, u, du) in &samples {
                        let e = (-mu * (b - t)).exp() * *w;
                        ig += e * (du[n] + delta * u[n]);
                        iu += e * u[n];
                    }
                    acc[n][slot] = acc[n][slot] * decay + ig;
                    acc[n][slot + 2] = acc[n][slot + 2] * decay + iu;
                }
            }
        }
        for (n, mode) in modes.iter().enumerate() {
            let hh = mode.h(t1);
            alpha[(n, s)] = mode.c(t1) * y0[n] + hh * v0[n] + mode.convolution(acc[n][0], acc[n][1]);
            z[(n, s)] = hh * y0[n] + mode.convolution(acc[n][2], acc[n][3]);
        }
    }
    let controls = DMatrix::from_columns(&grid.iter().map(|&t| signal.value(t)).collect::<Vec<_>>());
    Ok(Trajectory {
        grid: grid.to_vec(),
        lambdas: model.lambdas.clone(),
        cost_exponent: 0.5,
        alpha,
        z,
        controls,
        control_labels: (1..=k).map(|n| format!("u_{n}")).collect(),
        step: grid.get(1).copied().unwrap_or(0.0),
        halvings: 0,
    })
}
