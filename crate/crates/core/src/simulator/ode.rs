use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::simulator::{Controller, ForcingField, ModalModel, SimOptions, Trajectory};
use crate::spectral::modal_roots;

/// Step-size bound `2.7 / max |eig|` for classical RK4 on the closed loop.
pub const RK4_STABILITY_BOUND: f64 = 2.7;

const MAX_HALVINGS: u32 = 10;
const TARGET_SAMPLES: usize = 2000;

/// `min(1e-3, 0.1 / max |mu^+|)`.
pub fn default_step(model: &ModalModel) -> f64 {
    let fastest = model
        .lambdas
        .iter()
        .map(|&l| modal_roots(l, &model.kernel).mu_plus.norm())
        .fold(0.0, f64::max);
    if fastest > 0.0 {
        (0.1 / fastest).min(1e-3)
    } else {
        1e-3
    }
}

struct System<'a> {
    model: &'a ModalModel,
    controller: &'a dyn Controller,
    forcing: Option<&'a ForcingField>,
    k: usize,
}

impl System<'_> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let k = self.k;
        (
            x.rows(0, k).into_owned(),
            x.rows(k, k).into_owned(),
            x.rows(2 * k, x.len() - 2 * k).into_owned(),
        )
    }

    fn rhs(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        let b = self.model.kernel.b;
        let delta = self.model.kernel.delta;
        let (alpha, z, xi) = self.split(x);
        let mut u = self.controller.input(t, &alpha, &z, &xi);
        if let Some(f) = self.forcing {
            u += f.value(t);
        }
        let mut out = DVector::zeros(x.len());
        for n in 0..k {
            let l = self.model.lambdas[n];
            out[n] = -l * alpha[n] - b * l * z[n] + u[n];
            out[k + n] = alpha[n] - delta * z[n];
        }
        let alpha_dot = out.rows(0, k).into_owned();
        let dxi = self.controller.rhs(t, &alpha, &alpha_dot, &xi);
        out.rows_mut(2 * k, dxi.len()).copy_from(&dxi);
        out
    }

    /// Linear part of the right-hand side, probed at `t`.
    fn jacobian(&self, t: f64, dim: usize) -> DMatrix<f64> {
        let base = self.rhs(t, &DVector::zeros(dim));
        let mut j = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            j.set_column(i, &(self.rhs(t, &e) - &base));
        }
        j
    }
}

/// Integrates `alpha' = -lambda alpha - b lambda z + u + f`,
/// `z' = alpha - delta z` (plus the controller state) by classical RK4.
pub fn simulate_ode(
    model: &ModalModel,
    y0: &DVector<f64>,
    controller: &dyn Controller,
    forcing: Option<&ForcingField>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let k = model.modes();
    if y0.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "initial data has {} modes, model has {k}",
            y0.len()
        )));
    }
    if let Some(f) = forcing {
        if f.modes() != k {
            return Err(Error::DimensionMismatch(format!(
                "forcing has {} modes, model has {k}",
                f.modes()
            )));
        }
    }
    if !(opts.t_max.is_finite() && opts.t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("t_max = {} must be positive", opts.t_max)));
    }
    let sys = System {
        model,
        controller,
        forcing,
        k,
    };
    let d = controller.state_dim();
    let dim = 2 * k + d;

    let radius = eigenvalues(&sys.jacobian(0.0, dim))
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    let bound = if radius > 0.0 {
        RK4_STABILITY_BOUND / radius
    } else {
        f64::INFINITY
    };
    let requested = opts.step.unwrap_or_else(|| default_step(model));
    if !(requested.is_finite() && requested > 0.0) {
        return Err(Error::InvalidParameter(format!("step {requested} must be positive")));
    }
    let mut step = requested;
    let mut halvings = 0;
    while step > bound {
        if halvings == MAX_HALVINGS {
            return Err(Error::StepInstability {
                step: requested,
                bound,
            });
        }
        step *= 0.5;
        halvings += 1;
    }
    let n_steps = ((opts.t_max / step) - 1e-9).ceil().max(1.0) as usize;
    let h = opts.t_max / n_steps as f64;
    let stride = opts
        .stride
        .unwrap_or_else(|| n_steps.div_ceil(TARGET_SAMPLES))
        .max(1);

    let mut x = DVector::zeros(dim);
    x.rows_mut(0, k).copy_from(y0);
    x.rows_mut(2 * k, d).copy_from(&controller.initial_state());

    let labels = controller.channel_labels();
    let mut grid = Vec::new();
    let mut alpha_cols = Vec::new();
    let mut z_cols = Vec::new();
    let mut ctrl_cols = Vec::new();
    let mut record = |t: f64, x: &DVector<f64>| {
        let (a, z, xi) = sys.split(x);
        ctrl_cols.push(controller.record(t, &a, &z, &xi));
        grid.push(t);
        alpha_cols.push(a);
        z_cols.push(z);
    };
    record(0.0, &x);
    for s in 0..n_steps {
        let t = s as f64 * h;
        let k1 = sys.rhs(t, &x);
        let k2 = sys.rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = sys.rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = sys.rhs(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::StepInstability { step: h, bound });
        }
        if (s + 1) % stride == 0 || s + 1 == n_steps {
            record((s + 1) as f64 * h, &x);
        }
    }
    let channels = ctrl_cols.first().map_or(0, |c| c.len());
    let controls = if channels == 0 {
        DMatrix::zeros(0, grid.len())
    } else {
        DMatrix::from_columns(&ctrl_cols)
    };
    Ok(Trajectory {
        alpha: DMatrix::from_columns(&alpha_cols),
        z: DMatrix::from_columns(&z_cols),
        controls,
        control_labels: labels,
        grid,
        lambdas: model.lambdas.clone(),
        cost_exponent: opts.cost_exponent,
        step: h,
        halvings,
    })
}
