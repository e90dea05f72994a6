use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{controllability_gramian, expm, singular_values, DEFAULT_CELLS};
use crate::synthesis::{kalman_rank, rank_conditions, transform_system, CompanionSystem};

/// Gramian condition number above which the horizon is rejected.
pub const MAX_GRAMIAN_COND: f64 = 1e14;

/// Default number of grid intervals on `[0, T]`.
pub const DEFAULT_INTERVALS: usize = 1000;

/// Minimum-energy null control of the companion system together with the
/// physical modal control `v` (`v' + delta v = w`, `v(T) = 0`).
#[derive(Clone, Debug)]
pub struct NullControl {
    pub horizon: f64,
    pub delta: f64,
    pub grid: Vec<f64>,
    /// `M x samples`.
    pub w: DMatrix<f64>,
    /// `M x samples`.
    pub v: DMatrix<f64>,
    /// `int_0^T |w|^2`.
    pub energy: f64,
    /// `energy / |x0|^2` (0 when `x0 = 0`).
    pub energy_constant: f64,
    pub gramian_condition: f64,
    pub x0: DVector<f64>,
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    /// `G_T^{-1} e^{PT} x0`.
    eta: DVector<f64>,
}

impl NullControl {
    pub fn inputs(&self) -> usize {
        self.q.ncols()
    }

    /// `w(t) = -Q^T e^{P^T (T - t)} eta` on `[0, T]`, zero after `T`.
    pub fn w_at(&self, t: f64) -> DVector<f64> {
        if t > self.horizon || t < 0.0 {
            return DVector::zeros(self.inputs());
        }
        let e = expm(&(self.p.transpose() * (self.horizon - t)));
        -(self.q.transpose() * e * &self.eta)
    }

    /// `v(t) = -int_t^T e^{delta (s - t)} w(s) ds` in closed form.
    pub fn v_at(&self, t: f64) -> DVector<f64> {
        if t >= self.horizon {
            return DVector::zeros(self.inputs());
        }
        let tau = self.horizon - t.max(0.0);
        self.q.transpose() * shifted_exp_integral(&self.p, self.delta, tau) * &self.eta
    }

    /// Terminal state of `X' = P X + Q w` from `x0`, by RK4 on the grid.
    pub fn terminal_state(&self) -> DVector<f64> {
        simulate_companion(&self.p, &self.q, &self.x0, self.horizon, self.grid.len() - 1, |t| {
            self.w_at(t)
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = self.inputs();
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("w_{i}")));
        header.extend((1..=m).map(|i| format!("v_{i}")));
        let rows = self.grid.iter().enumerate().map(|(k, &t)| {
            let mut row = vec![t];
            row.extend(self.w.column(k).iter());
            row.extend(self.v.column(k).iter());
            row
        });
        crate::io::write_csv(path, &header, rows)
    }
}

/// `e^{delta tau} int_0^tau e^{(P^T - delta I) u} du`, via the exponential of
/// an augmented block matrix.
fn shifted_exp_integral(p: &DMatrix<f64>, delta: f64, tau: f64) -> DMatrix<f64> {
    let n = p.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    let shifted = p.transpose() - DMatrix::identity(n, n) * delta;
    block.view_mut((0, 0), (n, n)).copy_from(&(shifted * tau));
    block
        .view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * tau));
    let e = expm(&block);
    e.view((0, n), (n, n)).into_owned() * (delta * tau).exp()
}

/// Classical RK4 for `X' = P X + Q w(t)` over `[0, T]` in `steps` steps.
pub fn simulate_companion<F>(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    x0: &DVector<f64>,
    horizon: f64,
    steps: usize,
    w: F,
) -> DVector<f64>
where
    F: Fn(f64) -> DVector<f64>,
{
    let steps = steps.max(1);
    let h = horizon / steps as f64;
    let f = |t: f64, x: &DVector<f64>| p * x + q * w(t);
    let mut x = x0.clone();
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

struct GramianData {
    g_inv_e: DMatrix<f64>,
    g: DMatrix<f64>,
    cond: f64,
}

fn gramian_data(p: &DMatrix<f64>, q: &DMatrix<f64>, horizon: f64) -> Result<GramianData> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let controllable = match transform_system(p, q) {
        Ok(t) => rank_conditions(&t).pass,
        Err(_) => kalman_rank(p, q) == p.nrows(),
    };
    if !controllable {
        return Err(Error::GramianSingular);
    }
    let g = controllability_gramian(p, q, horizon, DEFAULT_CELLS);
    let s = singular_values(&g);
    let cond = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    if cond > MAX_GRAMIAN_COND {
        return Err(Error::HorizonTooSmall(cond));
    }
    let e = expm(&(p * horizon));
    let chol = g.clone().cholesky().ok_or(Error::HorizonTooSmall(cond))?;
    Ok(GramianData {
        g_inv_e: chol.solve(&e),
        g,
        cond,
    })
}

/// Minimum-energy control steering `x0` to zero at `T`, sampled on a
/// uniform grid of `intervals` steps.
pub fn min_energy_control_on(
    companion: &CompanionSystem,
    x0: &DVector<f64>,
    horizon: f64,
    intervals: usize,
) -> Result<NullControl> {
    let p = &companion.p_2n;
    let q = &companion.q_2nm;
    if x0.len() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system has dimension {}",
            x0.len(),
            p.nrows()
        )));
    }
    let data = gramian_data(p, q, horizon)?;
    let eta = &data.g_inv_e * x0;
    let energy = eta.dot(&(&data.g * &eta));
    let x_norm2 = x0.norm_squared();
    let intervals = intervals.max(1);
    let h = horizon / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|k| k as f64 * h).collect();
    let delta = companion.kernel.delta;

    // Backward recursion y_k = E y_{k+1}, y = e^{P^T (T - t)} eta.
    let m = q.ncols();
    let mut w = DMatrix::zeros(m, grid.len());
    let mut v = DMatrix::zeros(m, grid.len());
    let step = expm(&(p.transpose() * h));
    let cell = shifted_exp_integral(p, delta, h);
    let decay = (delta * h).exp();
    let mut y = eta.clone();
    let mut acc = DVector::zeros(p.nrows());
    for k in (0..grid.len()).rev() {
        if k + 1 < grid.len() {
            // acc(t_k) = e^{delta h} acc(t_{k+1}) + int_{t_k}^{t_{k+1}} e^{delta (s - t_k)} e^{P^T (T - s)} eta ds
            acc = &acc * decay + &cell * &y;
            y = &step * &y;
        }
        w.set_column(k, &(-(q.transpose() * &y)));
        v.set_column(k, &(q.transpose() * &acc));
    }
    Ok(NullControl {
        horizon,
        delta,
        grid,
        w,
        v,
        energy,
        energy_constant: if x_norm2 > 0.0 { energy / x_norm2 } else { 0.0 },
        gramian_condition: data.cond,
        x0: x0.clone(),
        p: p.clone(),
        q: q.clone(),
        eta,
    })
}

pub fn min_energy_control(
    companion: &CompanionSystem,
    x0: &DVector<f64>,
    horizon: f64,
) -> Result<NullControl> {
    min_energy_control_on(companion, x0, horizon, DEFAULT_INTERVALS)
}

/// Null control for physical modal data: the companion velocity
/// `a'(0) = -lambda a(0) + C v(0)` depends on `v(0)`, which is itself linear
/// in the companion state; the consistent state solves `(I - Q L) x0 = (a, -lambda a)`.
pub fn steer_modal_state(
    companion: &CompanionSystem,
    alpha0: &DVector<f64>,
    horizon: f64,
    intervals: usize,
) -> Result<NullControl> {
    let n = companion.n_modes();
    if alpha0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "modal data has length {}, block has {n} modes",
            alpha0.len()
        )));
    }
    let p = &companion.p_2n;
    let q = &companion.q_2nm;
    let data = gramian_data(p, q, horizon)?;
    let l = q.transpose()
        * shifted_exp_integral(p, companion.kernel.delta, horizon)
        * &data.g_inv_e;
    let base = companion.state(
        alpha0,
        &DVector::from_iterator(n, companion.lambdas.iter().zip(alpha0.iter()).map(|(l, a)| -l * a)),
    );
    let lhs = DMatrix::identity(2 * n, 2 * n) - q * l;
    if lhs.iter().any(|x| !x.is_finite()) {
        return Err(Error::SolverFailure(format!(
            "exp(delta T) = exp({:.1}) overflows the velocity system; use a shorter horizon",
            companion.kernel.delta * horizon
        )));
    }
    let x0 = lhs
        .lu()
        .solve(&base)
        .ok_or_else(|| Error::SolverFailure("initial velocity system is singular".into()))?;
    min_energy_control_on(companion, &x0, horizon, intervals)
}

/// `v(t) = -int_t^T e^{delta (s - t)} w(s) ds` from uniform samples of `w`
/// (rows are channels), integrating the piecewise-linear interpolant
/// against the exponential exactly.
pub fn recover_v(grid: &[f64], w: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let n = grid.len();
    let mut v = DMatrix::zeros(w.nrows(), n);
    for k in (0..n.saturating_sub(1)).rev() {
        let h = grid[k + 1] - grid[k];
        let x = delta * h;
        let (i0, i1) = if x < 1e-4 {
            (
                h * (1.0 + x / 2.0 + x * x / 6.0),
                h * (0.5 + x / 3.0 + x * x / 8.0),
            )
        } else {
            let e = x.exp();
            let i0 = (e - 1.0) / delta;
            (i0, (h * e / delta - i0 / delta) / h)
        };
        // int_0^h e^{delta s} (w_k + (w_{k+1} - w_k) s / h) ds = w_k (i0 - i1) + w_{k+1} i1
        for c in 0..w.nrows() {
            let integral = w[(c, k)] * (i0 - i1) + w[(c, k + 1)] * i1;
            v[(c, k)] = x.exp() * v[(c, k + 1)] - integral;
        }
    }
    v
}

/// Sup-norm of `v' + delta v - w` with fourth-order finite differences.
pub fn ode_residual(grid: &[f64], v: &DMatrix<f64>, w: &DMatrix<f64>, delta: f64) -> f64 {
    let n = grid.len();
    if n < 5 {
        return f64::NAN;
    }
    let h = grid[1] - grid[0];
    let mut worst: f64 = 0.0;
    for c in 0..v.nrows() {
        let f = |k: usize| v[(c, k)];
        for k in 0..n {
            let d = if k >= 2 && k + 2 < n {
                (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) / (12.0 * h)
            } else if k < 2 {
                (-25.0 * f(k) + 48.0 * f(k + 1) - 36.0 * f(k + 2) + 16.0 * f(k + 3)
                    - 3.0 * f(k + 4))
                    / (12.0 * h)
            } else {
                (25.0 * f(k) - 48.0 * f(k - 1) + 36.0 * f(k - 2) - 16.0 * f(k - 3)
                    + 3.0 * f(k - 4))
                    / (12.0 * h)
            };
            worst = worst.max((d + delta * f(k) - w[(c, k)]).abs());
        }
    }
    worst
}
