//! The four pipeline stages. Each reads a scenario, writes its artifacts into
//! the output directory and returns a serializable report.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use pidectl_core::linalg::integrate_samples;
use pidectl_core::riccati::{build_shifted, solve_are, RiccatiSolution, ARE_TOL, RATE_FRACTION};
use pidectl_core::simulator::{
    fit_norms, shift_control_for_forcing, simulate_ode, steady_state, DecayFit, ModalModel,
    SimOptions, ZeroControl,
};
use pidectl_core::spectral::{
    check_degeneracy, growth_bound, modal_roots, partition_spectrum, Degeneracy, MemoryKernel,
    UnstablePartition,
};
use pidectl_core::synthesis::{
    build_companion, companion_from_modes, default_actuators, gramian_ratio,
    kalman_observability_check, randomized_actuators, rank_conditions, steer_modal_state,
    transform_and_group, ActuatorSet, RankReport, DEFAULT_INTERVALS,
};
use pidectl_core::Error;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::scenario::{ActuatorSpec, Problem, Scenario};

pub const ANALYSIS_FILE: &str = "analysis.json";
pub const SYNTHESIS_FILE: &str = "synthesis.json";
pub const NULL_CONTROL_FILE: &str = "null_control.csv";
pub const CONTROLLER_FILE: &str = "controller.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DECAY_FILE: &str = "decay.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";

pub const NO_CONTROL_NOTE: &str = "no control required";

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeReport {
    pub label: String,
    pub lambda: f64,
    pub multiplicity: usize,
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    pub real_roots: bool,
    pub unstable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub kernel: MemoryKernel,
    pub omega0: f64,
    pub gamma: f64,
    pub modes: Vec<ModeReport>,
    pub degeneracy: Vec<Degeneracy>,
    pub partition: UnstablePartition,
}

impl AnalysisReport {
    pub fn summary(&self) -> String {
        let p = &self.partition;
        let mut s = format!(
            "omega0 = {}\ngamma = {}\nN1 = {}, N2 = {}, N = {}, M = {}\n",
            self.omega0, self.gamma, p.n1, p.n2, p.n_total, p.m_max
        );
        for g in &p.groups {
            s.push_str(&format!(
                "group {}: lambda = {} multiplicity {}\n",
                g.label, g.lambda, g.multiplicity
            ));
        }
        if p.n_total == 0 {
            s.push_str("no unstable modes: no control required\n");
        }
        s
    }
}

fn gamma_message(gamma: f64, omega0: f64) -> String {
    format!(
        "gamma_out_of_range: gamma = {gamma} must lie in (0, omega0) with omega0 = b + delta = {omega0}; \
         rates at or beyond the growth bound cannot be prescribed because the slow root branch \
         accumulates at omega0"
    )
}

pub fn analyze(scenario: &Scenario, out: &Path) -> CliResult<AnalysisReport> {
    let problem = scenario.resolve()?;
    let kernel = problem.kernel;
    let omega0 = growth_bound(&kernel);
    let degeneracy = check_degeneracy(&problem.spectrum, &kernel);
    if !degeneracy.is_empty() {
        return Err(CliError::config(
            "spectrum",
            format!("degenerate_spectrum: {degeneracy:?}"),
        ));
    }
    let partition = match partition_spectrum(&problem.spectrum, &kernel, scenario.gamma) {
        Ok(p) => p,
        Err(Error::GammaOutOfRange { gamma, omega0 }) => {
            return Err(CliError::config("gamma", gamma_message(gamma, omega0)))
        }
        Err(e) => return Err(e.into()),
    };
    let mut modes = Vec::new();
    let mut count = 0;
    for e in problem.spectrum.entries() {
        let r = modal_roots(e.lambda, &kernel);
        count += e.multiplicity;
        modes.push(ModeReport {
            label: e.label.clone(),
            lambda: e.lambda,
            multiplicity: e.multiplicity,
            mu_plus: r.mu_plus,
            mu_minus: r.mu_minus,
            real_roots: r.is_real,
            unstable: count <= partition.n_total,
        });
    }
    let report = AnalysisReport {
        kernel,
        omega0,
        gamma: scenario.gamma,
        modes,
        degeneracy,
        partition,
    };
    write_json(out, ANALYSIS_FILE, &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ActuatorReport {
    pub count: usize,
    pub description: String,
    pub attempts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NullControlReport {
    pub horizon: f64,
    pub energy: f64,
    pub energy_constant: f64,
    pub gramian_condition: f64,
    pub terminal_error: f64,
    pub file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiccatiReport {
    pub truncation_k: usize,
    pub residual: f64,
    pub a1: f64,
    pub a2: f64,
    pub max_closed_loop_real: f64,
    pub file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisReport {
    pub n_total: usize,
    pub m_max: usize,
    pub actuators: ActuatorReport,
    pub semisimple: bool,
    pub jordan_path: bool,
    pub rank: Option<RankReport>,
    pub gramian_ratio: Option<f64>,
    pub null_control: Option<NullControlReport>,
    pub riccati: RiccatiReport,
    pub note: String,
}

impl SynthesisReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "N = {}, M = {}, actuators = {} ({})\n",
            self.n_total, self.m_max, self.actuators.count, self.actuators.description
        );
        if self.jordan_path {
            s.push_str("Jordan path: generalized eigenvectors used\n");
        }
        if let Some(nc) = &self.null_control {
            s.push_str(&format!(
                "null control: T = {}, energy = {:.6e}, terminal error = {:.3e}\n",
                nc.horizon, nc.energy, nc.terminal_error
            ));
        }
        s.push_str(&format!(
            "riccati: K = {}, residual = {:.3e}, bounds [{:.6e}, {:.6e}]\n",
            self.riccati.truncation_k, self.riccati.residual, self.riccati.a1, self.riccati.a2
        ));
        if !self.note.is_empty() {
            s.push_str(&self.note);
            s.push('\n');
        }
        s
    }
}

/// Picks the actuator set and reports how it was found.
fn actuators_for(
    scenario: &Scenario,
    problem: &Problem,
    partition: &UnstablePartition,
    rows: usize,
) -> CliResult<(ActuatorSet, usize)> {
    if let Some(set) = scenario.actuator_matrix(rows)? {
        return Ok((set, 1));
    }
    match &scenario.actuators {
        ActuatorSpec::Eigenbasis { count } => {
            if partition.n_total == 0 {
                let m = count.unwrap_or(1).max(1);
                let c = nalgebra::DMatrix::zeros(1, m);
                return Ok((ActuatorSet::new(c, "no unstable modes: zero coefficients"), 1));
            }
            let set = default_actuators(partition, *count).map_err(|e| CliError::config("actuators", e))?;
            Ok((set, 1))
        }
        ActuatorSpec::Randomized { count } => {
            let n = partition.n_total.max(1);
            let m = count.unwrap_or(partition.m_max.max(1));
            let lambdas = partition.unstable_lambdas.clone();
            let kernel = problem.kernel;
            let (set, attempts) = randomized_actuators(n, m, scenario.seed, |c| {
                if lambdas.is_empty() {
                    return Ok(true);
                }
                let comp = companion_from_modes(&lambdas, &kernel, c.clone())?;
                let t = transform_and_group(&comp, partition)?;
                Ok(rank_conditions(&t).pass)
            })?;
            Ok((set, attempts))
        }
        _ => unreachable!("matrix-valued specs are handled above"),
    }
}

pub fn synthesize(scenario: &Scenario, out: &Path) -> CliResult<SynthesisReport> {
    let problem = scenario.resolve()?;
    let kernel = problem.kernel;
    let partition = match partition_spectrum(&problem.spectrum, &kernel, scenario.gamma) {
        Ok(p) => p,
        Err(Error::GammaOutOfRange { gamma, omega0 }) => {
            return Err(CliError::config("gamma", gamma_message(gamma, omega0)))
        }
        Err(e) => return Err(e.into()),
    };
    let available = problem.spectrum.mode_count();
    let (actuators, attempts) = actuators_for(scenario, &problem, &partition, available)?;
    fs::create_dir_all(out)?;

    let n = partition.n_total;
    let mut rank = None;
    let mut ratio = None;
    let mut semisimple = true;
    let mut null_control = None;
    let mut note = String::new();
    if n == 0 {
        note = NO_CONTROL_NOTE.to_string();
    } else {
        if actuators.count < partition.m_max {
            let (index, g) = partition
                .groups
                .iter()
                .enumerate()
                .find(|(_, g)| g.multiplicity > actuators.count)
                .expect("a group attains m_max");
            return Err(CliError::Rank(format!(
                "group {} ({}, lambda = {}) has multiplicity {} but only {} actuator(s) are available",
                index + 1,
                g.label,
                g.lambda,
                g.multiplicity,
                actuators.count
            )));
        }
        let companion = build_companion(&partition, &kernel, &actuators, &problem.spectrum)?;
        let transformed = transform_and_group(&companion, &partition)?;
        let report = rank_conditions(&transformed);
        semisimple = transformed.semisimple;
        ratio = Some(gramian_ratio(&transformed));
        if let Some(f) = report.first_failure() {
            let slot = f.slot.map_or_else(|| "?".to_string(), |s| s.to_string());
            return Err(CliError::Rank(format!(
                "rank test fails at group slot {slot} (eigenvalue {:.6}{:+.6}i): rank {} < {}",
                f.eigenvalue.re, f.eigenvalue.im, f.rank, f.required
            )));
        }
        if !kalman_observability_check(&transformed) {
            note = "warning: Gramian check is near its threshold".to_string();
        }
        rank = Some(report);
        let alpha0 = scenario.initial_data(n);
        let nc = steer_modal_state(&companion, &alpha0, scenario.horizon(problem.kernel.delta), DEFAULT_INTERVALS)?;
        nc.write_csv(&out.join(NULL_CONTROL_FILE))?;
        let end = nc.terminal_state();
        let x0 = nc.x0.norm();
        null_control = Some(NullControlReport {
            horizon: nc.horizon,
            energy: nc.energy,
            energy_constant: nc.energy_constant,
            gramian_condition: nc.gramian_condition,
            terminal_error: if x0 > 0.0 { end.norm() / x0 } else { end.norm() },
            file: NULL_CONTROL_FILE.to_string(),
        });
    }

    let shifted = build_shifted(
        &problem.spectrum,
        &kernel,
        scenario.gamma,
        &actuators,
        scenario.truncation,
        scenario.alpha,
    )?;
    let solution = solve_are(&shifted)?;
    if !(solution.residual <= ARE_TOL) {
        return Err(CliError::Solver(format!(
            "solver_failure: ARE residual {:.3e} exceeds {ARE_TOL:e}",
            solution.residual
        )));
    }
    solution.save(&out.join(CONTROLLER_FILE))?;
    let report = SynthesisReport {
        n_total: n,
        m_max: partition.m_max,
        actuators: ActuatorReport {
            count: actuators.count,
            description: actuators.description.clone(),
            attempts,
        },
        semisimple,
        jordan_path: !semisimple,
        rank,
        gramian_ratio: ratio,
        null_control,
        riccati: RiccatiReport {
            truncation_k: solution.truncation_k,
            residual: solution.residual,
            a1: solution.a1,
            a2: solution.a2,
            max_closed_loop_real: solution
                .closed_loop_eigs
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max),
            file: CONTROLLER_FILE.to_string(),
        },
        note,
    };
    write_json(out, SYNTHESIS_FILE, &report)?;
    Ok(report)
}

/// Number of simulated modes.
fn simulation_modes(scenario: &Scenario, problem: &Problem, controller: Option<&RiccatiSolution>) -> CliResult<usize> {
    let available = problem.spectrum.mode_count();
    let need = controller.map_or(0, |c| c.truncation_k);
    let k = scenario
        .simulation_modes
        .unwrap_or_else(|| need.max(16).min(available));
    if k < need {
        return Err(CliError::config(
            "simulation_modes",
            format!("{k} is smaller than the controller truncation {need}"),
        ));
    }
    if k > available {
        return Err(CliError::config(
            "simulation_modes",
            format!("{k} exceeds the {available} modes of the spectrum"),
        ));
    }
    Ok(k)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub modes: usize,
    pub closed_loop: bool,
    pub t_max: f64,
    pub step: f64,
    pub halvings: u32,
    pub samples: usize,
    pub final_norm: f64,
    pub trajectory: String,
    pub decay: String,
}

pub fn load_controller(path: &Path) -> CliResult<RiccatiSolution> {
    RiccatiSolution::load(path).map_err(|e| {
        CliError::config("controller", format!("{}: {e}", path.display()))
    })
}

/// Runs the modal simulation. With no controller the loop is open.
pub fn simulate(
    scenario: &Scenario,
    controller: Option<&RiccatiSolution>,
    out: &Path,
) -> CliResult<SimulationReport> {
    let problem = scenario.resolve()?;
    if let Some(c) = controller {
        if c.kernel != problem.kernel {
            return Err(CliError::config("controller", "kernel differs from the scenario"));
        }
    }
    let k = simulation_modes(scenario, &problem, controller)?;
    let model = ModalModel::from_spectrum(&problem.spectrum, &problem.kernel, k)?;
    if let Some(c) = controller {
        let same = c
            .lambdas
            .iter()
            .zip(&model.lambdas)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
        if !same {
            return Err(CliError::config("controller", "eigenvalues differ from the scenario spectrum"));
        }
    }
    let y0 = scenario.initial_data(k);
    let forcing = problem.forcing.as_ref().map(|f| f.resized(k));
    let mut opts = SimOptions::new(scenario.t_max()).with_cost_exponent(scenario.alpha);
    opts.step = scenario.step;

    let traj = match controller {
        Some(sol) => {
            let mut ctrl = sol.controller(k);
            if let Some(f) = &forcing {
                let y_e = steady_state(f, &model.lambdas, &model.kernel)?;
                let shift = shift_control_for_forcing(f, &model.kernel, &ctrl.coefficients)?;
                ctrl = ctrl.with_reference(y_e).with_shift(shift);
            }
            simulate_ode(&model, &y0, &ctrl, forcing.as_ref(), &opts)?
        }
        None => simulate_ode(&model, &y0, &ZeroControl(k), forcing.as_ref(), &opts)?,
    };
    fs::create_dir_all(out)?;
    traj.write_csv(&out.join(TRAJECTORY_FILE))?;
    traj.write_decay_csv(&out.join(DECAY_FILE))?;
    Ok(SimulationReport {
        modes: k,
        closed_loop: controller.is_some(),
        t_max: opts.t_max,
        step: traj.step,
        halvings: traj.halvings,
        samples: traj.samples(),
        final_norm: traj.alpha.column(traj.samples() - 1).norm(),
        trajectory: TRAJECTORY_FILE.to_string(),
        decay: DECAY_FILE.to_string(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub fitted_rate: f64,
    pub target_gamma: f64,
    pub pass: bool,
    pub weighted_integral: f64,
    pub energy_ratio: f64,
    pub bound: Option<f64>,
    pub fit: DecayFit,
    pub note: String,
}

impl Certificate {
    pub fn summary(&self) -> String {
        format!(
            "fitted rate = {:.6}, target gamma = {}, pass = {}, weighted integral = {:.6e}, energy ratio = {:.6e}{}\n",
            self.fitted_rate,
            self.target_gamma,
            self.pass,
            self.weighted_integral,
            self.energy_ratio,
            if self.note.is_empty() { String::new() } else { format!(" ({})", self.note) }
        )
    }
}

/// Evaluates the decay certificate from the recorded trajectory. Returns the
/// certificate even when it fails; the caller maps `pass = false` to an
/// exit code.
pub fn certify(
    scenario: &Scenario,
    controller: Option<&RiccatiSolution>,
    out: &Path,
) -> CliResult<Certificate> {
    let problem = scenario.resolve()?;
    let path = out.join(TRAJECTORY_FILE);
    if !path.exists() {
        return Err(CliError::config(
            "certify",
            format!("{} not found; run simulate first", path.display()),
        ));
    }
    let (header, rows) = pidectl_core::io::read_csv(&path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let alpha_cols: Vec<usize> = (1..)
        .map_while(|i| col(&format!("alpha_{i}")))
        .collect();
    let k = alpha_cols.len();
    if k == 0 || rows.is_empty() {
        return Err(CliError::config("certify", "trajectory file has no modal columns"));
    }
    if k > problem.spectrum.mode_count() {
        return Err(CliError::config("certify", "trajectory has more modes than the spectrum"));
    }
    let lambdas = problem.spectrum.mode_eigenvalues(k);
    let reference = match &problem.forcing {
        Some(f) => steady_state(&f.resized(k), &lambdas, &problem.kernel)?,
        None => DVector::zeros(k),
    };
    let a = scenario.alpha;
    let norm = |row: &[f64], s: f64| -> f64 {
        alpha_cols
            .iter()
            .enumerate()
            .map(|(n, &c)| {
                let d = row[c] - reference[n];
                lambdas[n].powf(2.0 * s) * d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let half: Vec<f64> = rows.iter().map(|r| norm(r, a - 0.5)).collect();
    let full: Vec<f64> = rows.iter().map(|r| norm(r, a)).collect();
    let gamma = scenario.gamma;
    let fit = fit_norms(&times, &half, None)?;
    let weighted: Vec<f64> = full
        .iter()
        .zip(&times)
        .map(|(n, t)| (2.0 * gamma * t).exp() * n * n)
        .collect();
    let weighted_integral = integrate_samples(&times, &weighted);
    let bound = controller.map(|c| c.a2 * half[0] * half[0]);
    let energy_ratio = match bound {
        Some(b) if b > 0.0 => weighted_integral / b,
        _ => 0.0,
    };
    let partition = partition_spectrum(&problem.spectrum, &problem.kernel, gamma)?;
    let mut notes = Vec::new();
    if partition.n_total == 0 {
        notes.push(NO_CONTROL_NOTE.to_string());
    }
    if controller.is_none() {
        notes.push("open loop".to_string());
    } else if controller.is_some_and(|c| c.gain.iter().all(|g| *g == 0.0)) {
        notes.push("zero gain".to_string());
    }
    let pass = fit.rate >= RATE_FRACTION * gamma && weighted_integral.is_finite();
    let cert = Certificate {
        fitted_rate: fit.rate,
        target_gamma: gamma,
        pass,
        weighted_integral,
        energy_ratio,
        bound,
        fit,
        note: notes.join("; "),
    };
    write_json(out, CERTIFICATE_FILE, &cert)?;
    Ok(cert)
}
