//! Exponentially shifted system, algebraic Riccati equation and the
//! resulting feedback law with decay certificates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, lyapunov, matrix_sign, symmetrize, GL8_NODES, GL8_WEIGHTS};
use crate::simulator::{
    fit_decay_rate, simulate_ode, DecayFit, FeedbackController, ModalModel, NormKind, SimOptions,
    Trajectory,
};
use crate::spectral::{partition_spectrum, MemoryKernel, Spectrum};
use crate::synthesis::ActuatorSet;

/// Relative ARE residual accepted without refinement.
pub const ARE_TOL: f64 = 1e-8;

/// Required fraction of the target rate.
pub const RATE_FRACTION: f64 = 0.98;

/// Default truncation `max(2N, 16)`, capped by the available modes.
pub fn default_truncation(n_unstable: usize, available: usize) -> usize {
    (2 * n_unstable).max(16).min(available).max(n_unstable)
}

/// Companion form of the `gamma`-shifted dynamics on the first `K` modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedSystem {
    pub gamma: f64,
    pub alpha: f64,
    pub kernel: MemoryKernel,
    /// Amplitude `b`, decay `delta - gamma`.
    pub kernel_tilde: MemoryKernel,
    pub truncation_k: usize,
    pub lambdas: Vec<f64>,
    /// `2K x 2K`, state `(a, a')`.
    pub p_2k_shifted: DMatrix<f64>,
    /// `2K x M`.
    pub q_2km: DMatrix<f64>,
    /// `diag(lambda^{2 alpha}, 0)`.
    pub weight: DMatrix<f64>,
    /// `K x M` modal actuator coefficients.
    pub coefficients: DMatrix<f64>,
}

impl ShiftedSystem {
    pub fn dim(&self) -> usize {
        self.p_2k_shifted.nrows()
    }

    /// Companion state of modal data whose initial velocity is `-lambda a`
    /// (no control at `t = 0`), in shifted coordinates `(a, a' + gamma a)`.
    pub fn embed(&self, y: &DVector<f64>) -> DVector<f64> {
        let k = self.truncation_k;
        let mut x = DVector::zeros(2 * k);
        for n in 0..k {
            x[n] = y[n];
            x[k + n] = (self.gamma - self.lambdas[n]) * y[n];
        }
        x
    }
}

/// Per-mode shifted companion blocks
/// `[[0, 1], [-(b lambda + (lambda - gamma)(delta - gamma)), -(lambda + delta - 2 gamma)]]`.
pub fn shifted_companion(lambdas: &[f64], kernel: &MemoryKernel, gamma: f64) -> DMatrix<f64> {
    let k = lambdas.len();
    let (b, d) = (kernel.b, kernel.delta);
    let mut p = DMatrix::zeros(2 * k, 2 * k);
    for (n, &l) in lambdas.iter().enumerate() {
        p[(n, k + n)] = 1.0;
        p[(k + n, n)] = -(b * l + (l - gamma) * (d - gamma));
        p[(k + n, k + n)] = -(l + d - 2.0 * gamma);
    }
    p
}

pub fn build_shifted(
    spectrum: &Spectrum,
    kernel: &MemoryKernel,
    gamma: f64,
    actuators: &ActuatorSet,
    truncation_k: Option<usize>,
    alpha: f64,
) -> Result<ShiftedSystem> {
    if !(gamma >= 0.0 && gamma < kernel.delta) {
        return Err(Error::GammaGeDelta {
            gamma,
            delta: kernel.delta,
        });
    }
    if !(0.0..=0.75).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let n_unstable = if gamma > 0.0 {
        partition_spectrum(spectrum, kernel, gamma)?.n_total
    } else {
        0
    };
    let available = spectrum.mode_count();
    let k = truncation_k.unwrap_or_else(|| default_truncation(n_unstable, available));
    if k == 0 || k > available {
        return Err(Error::InvalidCount(k));
    }
    if k < n_unstable {
        return Err(Error::DimensionMismatch(format!(
            "truncation K = {k} is smaller than the unstable block N = {n_unstable}"
        )));
    }
    let lambdas = spectrum.mode_eigenvalues(k);
    let coefficients = actuators.rows(k);
    let m = actuators.count;
    let mut q = DMatrix::zeros(2 * k, m);
    q.view_mut((k, 0), (k, m)).copy_from(&coefficients);
    let mut weight = DMatrix::zeros(2 * k, 2 * k);
    for (n, l) in lambdas.iter().enumerate() {
        weight[(n, n)] = l.powf(2.0 * alpha);
    }
    Ok(ShiftedSystem {
        gamma,
        alpha,
        kernel: *kernel,
        kernel_tilde: MemoryKernel {
            b: kernel.b,
            delta: kernel.delta - gamma,
        },
        truncation_k: k,
        p_2k_shifted: shifted_companion(&lambdas, kernel, gamma),
        q_2km: q,
        weight,
        coefficients,
        lambdas,
    })
}

/// Solution of `P^T R + R P - R Q Q^T R + W = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CareSolution {
    pub r: DMatrix<f64>,
    /// Frobenius residual divided by `|R|` (absolute when `R = 0`).
    pub residual: f64,
    pub closed_loop_eigs: Vec<Complex64>,
    pub refinement_steps: usize,
}

fn care_residual(p: &DMatrix<f64>, s: &DMatrix<f64>, w: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let res = (p.transpose() * r + r * p - r * s * r + w).norm();
    let scale = r.norm();
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}

/// Dense CARE solver: stable invariant subspace of the Hamiltonian through
/// the matrix sign function, refined by Newton-Kleinman steps when needed.
pub fn solve_care(p: &DMatrix<f64>, q: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<CareSolution> {
    let n = p.nrows();
    if n == 0 {
        return Ok(CareSolution {
            r: DMatrix::zeros(0, 0),
            residual: 0.0,
            closed_loop_eigs: Vec::new(),
            refinement_steps: 0,
        });
    }
    let s = q * q.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(p);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-w));
    h.view_mut((n, n), (n, n)).copy_from(&(-p.transpose()));

    let h_scale = h.norm().max(1.0);
    let axis = eigenvalues(&h)
        .iter()
        .map(|e| e.re.abs())
        .fold(f64::INFINITY, f64::min);
    if axis <= 1e-9 * h_scale {
        return Err(Error::NotStabilizable(format!(
            "Hamiltonian has eigenvalues within {axis:.3e} of the imaginary axis"
        )));
    }

    let z = matrix_sign(&h)?;
    let id = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + &id));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let svd = lhs.svd(true, true);
    let tol = 1e-14 * svd.singular_values.max();
    let r = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::SolverFailure(e.to_string()))?;
    let mut r = symmetrize(&r);
    let mut residual = care_residual(p, &s, w, &r);
    let mut steps = 0;
    while !(residual <= ARE_TOL) && steps < 10 {
        let f = p - &s * &r;
        let c = w + &r * &s * &r;
        let next = match lyapunov(&f, &c) {
            Ok(x) => x,
            Err(_) => break,
        };
        let res_next = care_residual(p, &s, w, &next);
        steps += 1;
        if res_next.is_finite() && (res_next < residual || !residual.is_finite()) {
            r = next;
            residual = res_next;
        } else {
            break;
        }
    }
    if !residual.is_finite() {
        return Err(Error::SolverFailure("non-finite Riccati solution".into()));
    }
    let closed = p - &s * &r;
    let closed_loop_eigs = eigenvalues(&closed);
    if let Some(bad) = closed_loop_eigs.iter().find(|e| e.re >= 0.0) {
        return Err(Error::NotStabilizable(format!(
            "closed-loop eigenvalue {:.6e}{:+.6e}i is not stable",
            bad.re, bad.im
        )));
    }
    Ok(CareSolution {
        r,
        residual,
        closed_loop_eigs,
        refinement_steps: steps,
    })
}

/// Riccati feedback for the shifted system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub truncation_k: usize,
    pub kernel: MemoryKernel,
    pub lambdas: Vec<f64>,
    /// `M x 2K`, `Q^T R`, acting on shifted coordinates.
    #[serde(with = "crate::io::matrix_rows")]
    pub gain: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub r_matrix: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub coefficients: DMatrix<f64>,
    pub residual: f64,
    pub closed_loop_eigs: Vec<Complex64>,
    /// Rayleigh bounds of `(R x, x) / |A^{alpha - 1/2} y|^2`.
    pub a1: f64,
    pub a2: f64,
}

impl RiccatiSolution {
    pub fn inputs(&self) -> usize {
        self.gain.nrows()
    }

    /// Gain in original coordinates `(a, a')`: `G [[I, 0], [gamma I, I]]`.
    pub fn original_gain(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.truncation_k;
        let m = self.inputs();
        let gp = self.gain.view((0, 0), (m, k)).into_owned();
        let gv = self.gain.view((0, k), (m, k)).into_owned();
        (gp + &gv * self.gamma, gv)
    }

    /// Dynamic feedback acting on a model with `model_k >= K` modes.
    pub fn controller(&self, model_k: usize) -> FeedbackController {
        let (gp, gv) = self.original_gain();
        let mut c = DMatrix::zeros(model_k, self.inputs());
        let rows = self.coefficients.nrows().min(model_k);
        c.view_mut((0, 0), (rows, self.inputs()))
            .copy_from(&self.coefficients.view((0, 0), (rows, self.inputs())));
        FeedbackController::new(gp, gv, c, self.kernel.delta)
    }

    /// Same controller with every gain entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.gain *= factor;
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        let k = s.truncation_k;
        if s.gain.ncols() != 2 * k || s.lambdas.len() != k || s.coefficients.nrows() != k {
            return Err(Error::DimensionMismatch(
                "controller document has inconsistent dimensions".into(),
            ));
        }
        if s.coefficients.ncols() != s.gain.nrows() {
            return Err(Error::DimensionMismatch(
                "gain rows do not match the actuator count".into(),
            ));
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Rayleigh bounds of `(R E y, E y)` against `|A^{alpha - 1/2} y|^2`, where
/// `E` embeds modal data with zero initial control.
pub fn rayleigh_bounds(shifted: &ShiftedSystem, r: &DMatrix<f64>) -> (f64, f64) {
    let k = shifted.truncation_k;
    let mut e = DMatrix::zeros(2 * k, k);
    for n in 0..k {
        e[(n, n)] = 1.0;
        e[(k + n, n)] = shifted.gamma - shifted.lambdas[n];
    }
    let d: Vec<f64> = shifted
        .lambdas
        .iter()
        .map(|l| l.powf(-(shifted.alpha - 0.5)))
        .collect();
    let scale = DMatrix::from_diagonal(&DVector::from_vec(d));
    let m = &scale * e.transpose() * r * &e * &scale;
    crate::linalg::sym_eig_range(&m)
}

pub fn solve_are(shifted: &ShiftedSystem) -> Result<RiccatiSolution> {
    let care = solve_care(&shifted.p_2k_shifted, &shifted.q_2km, &shifted.weight)?;
    let (lo, hi) = rayleigh_bounds(shifted, &care.r);
    Ok(RiccatiSolution {
        alpha: shifted.alpha,
        gamma: shifted.gamma,
        truncation_k: shifted.truncation_k,
        kernel: shifted.kernel,
        lambdas: shifted.lambdas.clone(),
        gain: shifted.q_2km.transpose() * &care.r,
        r_matrix: care.r,
        coefficients: shifted.coefficients.clone(),
        residual: care.residual,
        closed_loop_eigs: care.closed_loop_eigs,
        a1: lo,
        a2: hi,
    })
}

/// `u* = -gain x` in actuator coordinates.
pub fn feedback_gain_to_control(solution: &RiccatiSolution, state: &DVector<f64>) -> Result<DVector<f64>> {
    if state.len() != solution.gain.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, gain expects {}",
            state.len(),
            solution.gain.ncols()
        )));
    }
    Ok(-(&solution.gain * state))
}

/// Infinite-horizon cost `int_0^T (x^T W x + |G x|^2) dt` of the closed loop
/// `x' = (P - Q G) x`, by Gauss-Legendre quadrature on matrix exponentials.
pub fn closed_loop_cost(shifted: &ShiftedSystem, solution: &RiccatiSolution, x0: &DVector<f64>, horizon: f64) -> f64 {
    let a = &shifted.p_2k_shifted - &shifted.q_2km * &solution.gain;
    let cells = ((horizon * 8.0).ceil() as usize).max(64);
    let h = horizon / cells as f64;
    let step = expm(&(&a * h));
    let offsets: Vec<DMatrix<f64>> = GL8_NODES
        .iter()
        .map(|x| expm(&(&a * (0.5 * h * (1.0 + x)))))
        .collect();
    let mut start = x0.clone();
    let mut total = 0.0;
    for _ in 0..cells {
        for (off, w) in offsets.iter().zip(GL8_WEIGHTS.iter()) {
            let x = off * &start;
            let u = &solution.gain * &x;
            total += 0.5 * h * w * (x.dot(&(&shifted.weight * &x)) + u.norm_squared());
        }
        start = &step * start;
    }
    total
}

/// Outcome of a closed-loop decay run.
#[derive(Clone, Debug, Serialize)]
pub struct DecayCertificate {
    pub fitted_rate: f64,
    pub target_gamma: f64,
    pub pass: bool,
    /// `int e^{2 gamma t} |A^alpha y|^2 dt` over the simulated horizon.
    pub weighted_integral: f64,
    /// `a2 |A^{alpha - 1/2} y0|^2`.
    pub bound: f64,
    pub energy_ratio: f64,
    pub fit: DecayFit,
    pub note: String,
}

/// Simulates the closed loop of `solution` on the first `model.modes()` modes
/// and evaluates the decay certificate without failing on a miss.
pub fn evaluate_decay(
    solution: &RiccatiSolution,
    model: &ModalModel,
    y0: &DVector<f64>,
    t_max: f64,
    step: Option<f64>,
) -> Result<(DecayCertificate, Trajectory)> {
    if model.modes() < solution.truncation_k {
        return Err(Error::DimensionMismatch(format!(
            "model has {} modes, controller needs {}",
            model.modes(),
            solution.truncation_k
        )));
    }
    let controller = solution.controller(model.modes());
    let mut opts = SimOptions::new(t_max).with_cost_exponent(solution.alpha);
    opts.step = step;
    let traj = simulate_ode(model, y0, &controller, None, &opts)?;
    let fit = fit_decay_rate(&traj, NormKind::Half, None)?;
    let weighted_integral = traj.weighted_integral(solution.gamma);
    let y0_half = traj.weighted_norm(0, solution.alpha - 0.5);
    let bound = solution.a2 * y0_half * y0_half;
    let energy_ratio = if bound > 0.0 { weighted_integral / bound } else { 0.0 };
    let pass = fit.rate >= RATE_FRACTION * solution.gamma && weighted_integral.is_finite();
    let note = if solution.gain.iter().all(|g| *g == 0.0) {
        "zero gain: open-loop decay".to_string()
    } else {
        String::new()
    };
    Ok((
        DecayCertificate {
            fitted_rate: fit.rate,
            target_gamma: solution.gamma,
            pass,
            weighted_integral,
            bound,
            energy_ratio,
            fit,
            note,
        },
        traj,
    ))
}

/// As [`evaluate_decay`], failing with the trajectory when the fitted rate
/// falls short of `0.98 gamma`.
pub fn certify_decay(
    solution: &RiccatiSolution,
    model: &ModalModel,
    y0: &DVector<f64>,
    t_max: f64,
) -> Result<DecayCertificate> {
    let (cert, traj) = evaluate_decay(solution, model, y0, t_max, None)?;
    if !cert.pass {
        return Err(Error::DecayViolation {
            fitted: cert.fitted_rate,
            required: RATE_FRACTION * solution.gamma,
            trajectory: Box::new(traj),
        });
    }
    Ok(cert)
}
