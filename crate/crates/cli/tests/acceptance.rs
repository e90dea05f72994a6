//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pidectl_cli::Scenario;
use pidectl_core::fluids::{jeffreys_reduce, oldroyd_to_abstract, JeffreysParams, OldroydParams};
use pidectl_core::linalg::{eigenvalues, multiset_distance, singular_values};
use pidectl_core::riccati::{build_shifted, solve_are, solve_care, ARE_TOL};
use pidectl_core::simulator::{
    fit_decay_rate, shift_control_for_forcing, simulate_exact, simulate_ode, steady_state,
    FnSignal, ModalModel, NormKind, OpenLoop, SimOptions, ZeroControl,
};
use pidectl_core::spectral::{
    check_degeneracy, modal_roots, partition_spectrum, MemoryKernel, Spectrum, SpectrumEntry,
};
use pidectl_core::synthesis::{
    build_companion, companion_from_modes, default_actuators, kalman_observability_check,
    min_energy_control, ode_residual, rank_conditions, recover_v, steer_modal_state,
    transform_and_group, transform_system, ActuatorSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: f64) -> Result<(), String> {
    let t = start.elapsed().as_secs_f64();
    check(t < limit, format!("runtime {t:.2}s exceeds {limit}s"))
}

fn squares(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j * j) as f64).collect()
}

// 1
fn root_formula() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_vieta: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    for _ in 0..1000 {
        let lambda = rng.random_range(0.0..1e4_f64).max(1e-9);
        let b = rng.random_range(0.0..10.0);
        let delta = rng.random_range(1e-3..50.0);
        let r = modal_roots(lambda, &MemoryKernel::new(b, delta).unwrap());
        let s = lambda + delta;
        let p = lambda * (b + delta);
        worst_vieta = worst_vieta
            .max((r.sum() - s).norm() / s)
            .max((r.product() - p).norm() / p);
        // Textbook formula for the roots of r^2 + s r + p, negated.
        let disc = Complex64::new(s * s - 4.0 * p, 0.0).sqrt();
        let direct = [(s + disc) / 2.0, (s - disc) / 2.0];
        let scale = direct[0].norm().max(direct[1].norm());
        let d = multiset_distance(&[r.mu_plus, r.mu_minus], &direct) / scale;
        worst_direct = worst_direct.max(d);
    }
    check(worst_vieta < 1e-12, format!("Vieta error {worst_vieta:e}"))?;
    check(worst_direct < 1e-12, format!("direct-formula error {worst_direct:e}"))?;
    within(start, 1.0)?;
    Ok(format!("Vieta {worst_vieta:.1e}, direct {worst_direct:.1e}"))
}

// 2
fn asymptotics() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let b = rng.random_range(0.0..10.0);
        let delta = rng.random_range(0.01..10.0);
        let lambda = 1e6 * (b + delta + 1.0);
        let r = modal_roots(lambda, &MemoryKernel::new(b, delta).unwrap());
        worst = worst.max((r.mu_minus.re - (b + delta)).abs());
    }
    let normalized = modal_roots(1e6 * 4.0, &MemoryKernel::new(1.0, 2.0).unwrap());
    check(worst < 1e-2, format!("max deviation {worst:e}"))?;
    check((normalized.mu_minus.re - 3.0).abs() < 1e-2, "b = 1 limit is not delta + 1")?;
    within(start, 1.0)?;
    Ok(format!("max |Re mu- - (b+delta)| = {worst:.2e}"))
}

// 3
fn companion_spectrum() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut sizes = Vec::new();
    while done < 100 {
        let n_entries = rng.random_range(1..=6);
        let mut entries = Vec::new();
        let mut lambda = 0.0;
        for i in 0..n_entries {
            lambda += rng.random_range(0.2..3.0);
            let mult = if rng.random_bool(0.25) { 2 } else { 1 };
            entries.push(SpectrumEntry::new(lambda, mult, format!("e{i}")));
        }
        let spectrum = Spectrum::new(entries).unwrap();
        let kernel = MemoryKernel::new(rng.random_range(0.2..3.0), rng.random_range(0.5..5.0)).unwrap();
        let roots: Vec<_> = spectrum.entries().iter().map(|e| modal_roots(e.lambda, &kernel)).collect();
        if roots.iter().any(|r| r.gap() < 1e-2) || !check_degeneracy(&spectrum, &kernel).is_empty() {
            continue;
        }
        let gamma = rng.random_range(0.1..0.95) * (kernel.b + kernel.delta);
        let part = partition_spectrum(&spectrum, &kernel, gamma).unwrap();
        if part.n_total == 0 || part.n_total > 8 {
            continue;
        }
        let act = default_actuators(&part, None).unwrap();
        let comp = build_companion(&part, &kernel, &act, &spectrum).unwrap();
        let want: Vec<Complex64> = comp
            .lambdas
            .iter()
            .flat_map(|&l| {
                let r = modal_roots(l, &kernel);
                [-r.mu_plus, -r.mu_minus]
            })
            .collect();
        let got = eigenvalues(&comp.p_2n);
        worst = worst.max(multiset_distance(&got, &want));
        sizes.push(part.n_total);
        done += 1;
    }
    check(worst <= 1e-9, format!("eigenvalue mismatch {worst:e}"))?;
    within(start, 5.0)?;
    Ok(format!(
        "100 partitions, N up to {}, max mismatch {worst:.1e}",
        sizes.iter().max().unwrap()
    ))
}

/// Random real system built in Jordan coordinates with blocks of size 1 and
/// 2; returns `(P, Q, controllable)` with the expected answer read off the
/// block-bottom rows.
fn jordan_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, bool) {
    let gauss = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
        DMatrix::from_fn(r, c, |_, _| -> f64 { StandardNormal.sample(rng) })
    };
    let m = rng.random_range(1..=2);
    let n_values = rng.random_range(1..=m + 1);
    let mut bottoms: Vec<Vec<usize>> = Vec::new();
    let mut diag: Vec<(f64, usize)> = Vec::new();
    let mut dim = 0;
    for i in 0..n_values {
        let value = -0.4 - 1.5 * i as f64 + rng.random_range(-0.1..0.1);
        let blocks = if rng.random_bool(0.3) {
            vec![1, 1]
        } else if rng.random_bool(0.4) {
            vec![2]
        } else {
            vec![1]
        };
        let mut b = Vec::new();
        for size in blocks {
            diag.push((value, size));
            dim += size;
            b.push(dim - 1);
        }
        bottoms.push(b);
    }
    let mut j = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for (value, size) in diag {
        for r in 0..size {
            j[(at + r, at + r)] = value;
            if r + 1 < size {
                j[(at + r, at + r + 1)] = 1.0;
            }
        }
        at += size;
    }
    let slice_min = |q: &DMatrix<f64>, rows: &[usize]| {
        let s = singular_values(&DMatrix::from_fn(rows.len(), m, |i, c| q[(rows[i], c)]));
        if s.len() < rows.len() {
            0.0
        } else {
            s[rows.len() - 1]
        }
    };
    let mut q_bar = loop {
        let q = gauss(rng, dim, m);
        if bottoms.iter().all(|r| r.len() > m || slice_min(&q, r) > 0.5) {
            break q;
        }
    };
    if rng.random_bool(0.5) {
        let rows = &bottoms[rng.random_range(0..bottoms.len())];
        if rows.len() == 1 {
            q_bar.row_mut(rows[0]).fill(0.0);
        } else {
            let c = rng.random_range(-2.0..2.0);
            let first = q_bar.row(rows[0]).into_owned();
            q_bar.row_mut(rows[1]).copy_from(&(first * c));
        }
    }
    let expected = bottoms.iter().all(|r| r.len() <= m && slice_min(&q_bar, r) > 1e-8);
    let v = loop {
        let v = gauss(rng, dim, dim);
        let s = singular_values(&v);
        if s[0] / s[dim - 1] < 50.0 {
            break v;
        }
    };
    let vi = v.clone().try_inverse().unwrap();
    (&v * j * vi, v * q_bar, expected)
}

// 4
fn controllability_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pass, mut fail, mut defective, mut double) = (0, 0, 0, 0);
    for i in 0..100 {
        let (p, q, expected) = jordan_instance(&mut rng);
        let t = transform_system(&p, &q).map_err(|e| format!("instance {i}: {e}"))?;
        if !t.semisimple {
            defective += 1;
        }
        if t.clusters.iter().any(|c| c.geometric() == 2) {
            double += 1;
        }
        let rank = rank_conditions(&t).pass;
        let gram = kalman_observability_check(&t);
        check(rank == gram, format!("instance {i}: rank {rank}, gramian {gram}"))?;
        check(rank == expected, format!("instance {i}: expected {expected}"))?;
        if rank {
            pass += 1;
        } else {
            fail += 1;
        }
    }
    // One actuator against a multiplicity-2 modal group.
    let spectrum = Spectrum::new(vec![SpectrumEntry::new(0.5, 2, "d")]).unwrap();
    let kernel = MemoryKernel::new(1.0, 4.0).unwrap();
    let part = partition_spectrum(&spectrum, &kernel, 3.9).unwrap();
    let comp = companion_from_modes(&part.unstable_lambdas, &kernel, DMatrix::from_column_slice(2, 1, &[0.6, 0.8]))
        .unwrap();
    let t = transform_and_group(&comp, &part).unwrap();
    check(!rank_conditions(&t).pass && !kalman_observability_check(&t), "M = 1 against multiplicity 2 passed")?;
    check(defective >= 10 && double >= 10, "too few structured instances")?;
    within(start, 10.0)?;
    Ok(format!(
        "{pass} controllable, {fail} not, {defective} defective, {double} with a double eigenvalue; M=1 vs multiplicity 2 fails both"
    ))
}

// 5
fn null_control() -> Outcome {
    let start = Instant::now();
    let spectrum = Spectrum::from_eigenvalues(&squares(8)).unwrap();
    let kernel = MemoryKernel::new(1.0, 1.0).unwrap();
    let part = partition_spectrum(&spectrum, &kernel, 1.9).unwrap();
    check(part.n_total == 1, format!("N = {}", part.n_total))?;
    let act = default_actuators(&part, None).unwrap();
    let comp = build_companion(&part, &kernel, &act, &spectrum).unwrap();
    let x0 = DVector::from_vec(vec![1.0, -0.5]);
    let nc = min_energy_control(&comp, &x0, 1.0).map_err(|e| e.to_string())?;
    let terminal = nc.terminal_state().norm() / x0.norm();
    check(terminal <= 1e-6, format!("|X(T)| / |x0| = {terminal:e}"))?;
    let v = recover_v(&nc.grid, &nc.w, nc.delta);
    let last = nc.grid.len() - 1;
    let v_end = v.column(last).amax();
    check(v_end == 0.0, format!("v(T) = {v_end:e}"))?;
    let scale = nc.w.amax();
    let residual = ode_residual(&nc.grid, &nc.v, &nc.w, nc.delta) / scale;
    check(residual <= 1e-6, format!("ODE residual {residual:e}"))?;
    // Physical data: the same holds starting from modal coefficients.
    let steered = steer_modal_state(&comp, &DVector::from_element(1, 1.0), 1.0, 1000).map_err(|e| e.to_string())?;
    let t2 = steered.terminal_state().norm() / steered.x0.norm();
    check(t2 <= 1e-6, format!("modal steering terminal error {t2:e}"))?;
    within(start, 1.0)?;
    Ok(format!("|X(T)|/|x0| = {terminal:.1e}, v(T) = 0, residual {residual:.1e}"))
}

// 6
fn spectrum_shift() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let k = rng.random_range(1..=4);
        let lambdas: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..30.0)).collect();
        let kernel = MemoryKernel::new(rng.random_range(0.1..3.0), rng.random_range(0.5..6.0)).unwrap();
        if lambdas.iter().any(|&l| modal_roots(l, &kernel).gap() < 0.1) {
            continue;
        }
        let gamma = rng.random_range(0.01..0.99) * kernel.delta;
        let base = companion_from_modes(&lambdas, &kernel, DMatrix::zeros(k, 1)).unwrap();
        let want: Vec<Complex64> = eigenvalues(&base.p_2n).into_iter().map(|z| z + gamma).collect();
        let got = eigenvalues(&pidectl_core::riccati::shifted_companion(&lambdas, &kernel, gamma));
        let scale = want.iter().map(|z| z.norm()).fold(1.0, f64::max);
        worst = worst.max(multiset_distance(&got, &want) / scale);
        done += 1;
    }
    check(worst <= 1e-10, format!("shift mismatch {worst:e}"))?;
    within(start, 5.0)?;
    Ok(format!("max relative mismatch {worst:.1e}"))
}

// 7
fn are_correctness() -> Outcome {
    let start = Instant::now();
    let one = |x: f64| DMatrix::from_element(1, 1, x);
    let scalar = solve_care(&one(1.0), &one(1.0), &one(2.0)).map_err(|e| e.to_string())?;
    let err = (scalar.r[(0, 0)] - (1.0 + 3f64.sqrt())).abs();
    check(err <= 1e-10, format!("scalar R error {err:e}"))?;

    let spectrum = Spectrum::from_eigenvalues(&squares(16)).unwrap();
    let kernel = MemoryKernel::new(1.0, 4.0).unwrap();
    let gamma = 2.0;
    let part = partition_spectrum(&spectrum, &kernel, gamma).unwrap();
    let act = default_actuators(&part, None).unwrap();
    let mut worst_res: f64 = 0.0;
    let mut worst_cost: f64 = 0.0;
    for k in [4, 8] {
        let sys = build_shifted(&spectrum, &kernel, gamma, &act, Some(k), 0.5).unwrap();
        let sol = solve_are(&sys).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(sol.residual);
        let x0 = sys.embed(&DVector::from_fn(k, |i, _| 1.0 / (i + 1) as f64));
        let value = 0.5 * x0.dot(&(&sol.r_matrix * &x0));
        // RK4 on the closed loop with trapezoidal cost accumulation.
        let a = &sys.p_2k_shifted - &sys.q_2km * &sol.gain;
        let t_inf = 20.0 / gamma;
        let h = 1e-3;
        let steps = (t_inf / h).round() as usize;
        let integrand = |x: &DVector<f64>| 0.5 * (x.dot(&(&sys.weight * x)) + (&sol.gain * x).norm_squared());
        let mut x = x0.clone();
        let mut cost = 0.5 * h * integrand(&x);
        for s in 0..steps {
            let k1 = &a * &x;
            let k2 = &a * (&x + &k1 * (0.5 * h));
            let k3 = &a * (&x + &k2 * (0.5 * h));
            let k4 = &a * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let w = if s + 1 == steps { 0.5 } else { 1.0 };
            cost += w * h * integrand(&x);
        }
        worst_cost = worst_cost.max(((cost - value) / value).abs());
    }
    check(worst_res <= ARE_TOL, format!("residual {worst_res:e}"))?;
    check(worst_cost <= 1e-2, format!("cost mismatch {worst_cost:e}"))?;
    within(start, 10.0)?;
    Ok(format!(
        "scalar R error {err:.1e}, residual {worst_res:.1e}, value vs cost {:.2}%",
        100.0 * worst_cost
    ))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pidectl")
}

fn run_cli(config: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(bin())
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("run pidectl");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap_or(-1), text)
}

// 8
fn decay_certification() -> Outcome {
    let start = Instant::now();
    let spectrum = Spectrum::from_eigenvalues(&squares(16)).unwrap();
    let kernel = MemoryKernel::new(1.0, 4.0).unwrap();
    let gamma = 2.0;
    let model = ModalModel::from_spectrum(&spectrum, &kernel, 16).unwrap();
    let y0 = DVector::from_fn(16, |i, _| 1.0 / (i + 1) as f64);
    let opts = SimOptions::new(10.0);
    let open = simulate_ode(&model, &y0, &ZeroControl(16), None, &opts).map_err(|e| e.to_string())?;
    let open_rate = fit_decay_rate(&open, NormKind::Half, Some((5.0, 10.0))).map_err(|e| e.to_string())?.rate;
    let predicted = (5.0 - 5f64.sqrt()) / 2.0;
    check(
        ((open_rate - predicted) / predicted).abs() <= 0.02,
        format!("open-loop rate {open_rate} vs {predicted}"),
    )?;

    let part = partition_spectrum(&spectrum, &kernel, gamma).unwrap();
    let act = default_actuators(&part, None).unwrap();
    let sys = build_shifted(&spectrum, &kernel, gamma, &act, Some(16), 0.5).unwrap();
    let sol = solve_are(&sys).map_err(|e| e.to_string())?;
    let (cert, _) = pidectl_core::riccati::evaluate_decay(&sol, &model, &y0, 10.0, None).map_err(|e| e.to_string())?;
    check(cert.fitted_rate >= 1.96, format!("closed-loop rate {}", cert.fitted_rate))?;
    check(cert.weighted_integral.is_finite(), "weighted integral is not finite")?;

    // The same run through the command-line pipeline.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("headline.json");
    let doc = serde_json::json!({
        "spectrum": {"source": "values", "values": squares(16)},
        "kernel": {"b": 1.0, "delta": 4.0},
        "gamma": gamma,
        "alpha": 0.5,
        "truncation": 16,
        "t_max": 10.0,
        "out": dir.path().join("out"),
    });
    std::fs::write(&config, doc.to_string()).unwrap();
    for cmd in ["analyze", "synthesize", "simulate", "certify"] {
        let (code, text) = run_cli(&config, &[cmd]);
        check(code == 0, format!("{cmd} exited {code}: {text}"))?;
    }
    let cert_doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/certificate.json")).unwrap()).unwrap();
    check(cert_doc["pass"] == serde_json::json!(true), "CLI certificate did not pass")?;
    within(start, 30.0)?;
    Ok(format!(
        "open loop {open_rate:.4} (predicted {predicted:.4}), closed loop {:.4} >= 1.96, weighted integral {:.3e}",
        cert.fitted_rate, cert.weighted_integral
    ))
}

// 9
fn cross_method() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let k = rng.random_range(1..=4);
        let lambdas: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..50.0)).collect();
        let kernel = MemoryKernel::new(rng.random_range(0.0..3.0), rng.random_range(0.2..6.0)).unwrap();
        if lambdas.iter().any(|&l| modal_roots(l, &kernel).gap() < 1e-3) {
            continue;
        }
        let model = ModalModel::new(lambdas, kernel).unwrap();
        let y0 = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let amp: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let freq: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
        let amp2 = amp.clone();
        let freq2 = freq.clone();
        let u = FnSignal {
            value: move |t: f64| DVector::from_fn(k, |i, _| amp[i] * (freq[i] * t).sin() + 0.3 * amp[i] * (-t).exp()),
            derivative: move |t: f64| {
                DVector::from_fn(k, |i, _| amp2[i] * freq2[i] * (freq2[i] * t).cos() - 0.3 * amp2[i] * (-t).exp())
            },
        };
        let ode = simulate_ode(&model, &y0, &OpenLoop(&u), None, &SimOptions::new(5.0)).map_err(|e| e.to_string())?;
        let exact = simulate_exact(&model, &y0, &u, &ode.grid).map_err(|e| e.to_string())?;
        let rel = (&ode.alpha - &exact.alpha).amax() / exact.alpha.amax().max(1e-300);
        worst = worst.max(rel);
        done += 1;
    }
    check(worst <= 1e-6, format!("relative sup-norm difference {worst:e}"))?;
    within(start, 30.0)?;
    Ok(format!("50 instances, max relative difference {worst:.1e}"))
}

// 10
fn forcing_translation() -> Outcome {
    let start = Instant::now();
    let k = 8;
    let spectrum = Spectrum::from_eigenvalues(&squares(k)).unwrap();
    let kernel = MemoryKernel::new(1.0, 4.0).unwrap();
    let gamma = 2.0;
    let mut c = DMatrix::zeros(k, 2);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    let act = ActuatorSet::new(c, "first two modes");
    let sys = build_shifted(&spectrum, &kernel, gamma, &act, Some(k), 0.5).unwrap();
    let sol = solve_are(&sys).map_err(|e| e.to_string())?;
    let model = ModalModel::from_spectrum(&spectrum, &kernel, k).unwrap();
    let mut f_e = vec![0.0; k];
    f_e[0] = 2.0;
    f_e[1] = -1.0;
    let forcing = pidectl_core::simulator::ForcingField::constant(f_e.clone());
    let y_e = steady_state(&forcing, &model.lambdas, &kernel).unwrap();
    for n in 0..k {
        let want = f_e[n] / (model.lambdas[n] * (1.0 + kernel.b / kernel.delta));
        check((y_e[n] - want).abs() <= 1e-15, "steady state formula")?;
    }
    let ctrl = sol.controller(k);
    let shift = shift_control_for_forcing(&forcing, &kernel, &ctrl.coefficients).map_err(|e| e.to_string())?;
    let ctrl = ctrl.with_reference(y_e.clone()).with_shift(shift);
    let t_end = 20.0 / gamma;
    let opts = SimOptions::new(t_end);
    let from_zero = simulate_ode(&model, &DVector::zeros(k), &ctrl, Some(&forcing), &opts).map_err(|e| e.to_string())?;
    let last = from_zero.samples() - 1;
    let gap = (from_zero.alpha.column(last) - &y_e).amax();
    check(gap <= 1e-4, format!("distance to y_e at t = {t_end}: {gap:e}"))?;
    let fixed = simulate_ode(&model, &y_e, &ctrl, Some(&forcing), &opts).map_err(|e| e.to_string())?;
    let drift = (0..fixed.samples())
        .map(|j| (fixed.alpha.column(j) - &y_e).amax())
        .fold(0.0, f64::max);
    check(drift <= 1e-8, format!("fixed point drift {drift:e}"))?;
    within(start, 10.0)?;
    Ok(format!("|y(T) - y_e| = {gap:.1e}, fixed-point drift {drift:.1e}"))
}

// 11
fn fluid_maps() -> Outcome {
    let start = Instant::now();
    let o = oldroyd_to_abstract(&OldroydParams { nu: 1.0, kappa: 0.5, lambda_relax: 1.0 }).map_err(|e| e.to_string())?;
    check(
        (o.mu, o.kernel.b, o.kernel.delta, o.omega0) == (1.0, 1.0, 1.0, 2.0),
        format!("Oldroyd map {o:?}"),
    )?;
    let (kj, _) = jeffreys_reduce(&JeffreysParams { mu_visc: 2.0, kappa: 1.0, lambda_relax: 3.0, tau0: vec![] })
        .map_err(|e| e.to_string())?;
    check((kj.b, kj.delta) == (0.5, 3.0), format!("Jeffreys map {kj:?}"))?;
    // Oldroyd parameters with the same kernel: delta = 1 / lambda = 3, b = nu / kappa - 3 = 0.5.
    let matched = oldroyd_to_abstract(&OldroydParams { nu: 3.5, kappa: 1.0, lambda_relax: 1.0 / 3.0 })
        .map_err(|e| e.to_string())?;
    let kernel_gap = (matched.kernel.b - kj.b).abs() + (matched.kernel.delta - kj.delta).abs();
    let lambdas = squares(6).iter().map(|l| l * std::f64::consts::PI.powi(2)).collect::<Vec<_>>();
    let y0 = DVector::from_fn(6, |i, _| 1.0 / (i + 1) as f64);
    let opts = SimOptions::new(1.0);
    let a = simulate_ode(&ModalModel::new(lambdas.clone(), kj).unwrap(), &y0, &ZeroControl(6), None, &opts)
        .map_err(|e| e.to_string())?;
    let b = simulate_ode(&ModalModel::new(lambdas, matched.kernel).unwrap(), &y0, &ZeroControl(6), None, &opts)
        .map_err(|e| e.to_string())?;
    let diff = a.max_difference(&b);
    check(diff <= 1e-12, format!("trajectory difference {diff:e} (kernel gap {kernel_gap:e})"))?;
    within(start, 1.0)?;
    Ok(format!("maps exact, matched trajectories differ by {diff:.1e}"))
}

// 12
fn multiplicity_exercise() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = |count: usize, out: &str| {
        serde_json::json!({
            "spectrum": {"source": "model", "model": {"kind": "square2d"}, "scale": 1.0, "modes": 12},
            "kernel": {"b": 1.0, "delta": 100.0},
            "gamma": 60.0,
            "actuators": {"kind": "eigenbasis", "count": count},
            "out": dir.path().join(out),
        })
    };
    let one = dir.path().join("m1.json");
    let two = dir.path().join("m2.json");
    std::fs::write(&one, scenario(1, "m1").to_string()).unwrap();
    std::fs::write(&two, scenario(2, "m2").to_string()).unwrap();

    let parsed = Scenario::load(&two).map_err(|e| e.to_string())?;
    let report = pidectl_cli::analyze(&parsed, &dir.path().join("m2")).map_err(|e| e.to_string())?;
    let five = report
        .partition
        .groups
        .iter()
        .find(|g| g.label == "s5")
        .ok_or("no 5 pi^2 group in the unstable block")?;
    check(five.multiplicity == 2, "5 pi^2 level is not double")?;

    let (code, text) = run_cli(&one, &["synthesize"]);
    check(code == 3, format!("M = 1 exited {code}: {text}"))?;
    check(text.contains("group 2"), format!("failing group not reported: {text}"))?;
    for cmd in ["synthesize", "simulate", "certify"] {
        let (code, text) = run_cli(&two, &[cmd]);
        check(code == 0, format!("M = 2 {cmd} exited {code}: {text}"))?;
    }
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m2/certificate.json")).unwrap()).unwrap();
    check(cert["pass"] == serde_json::json!(true), "certificate failed")?;
    within(start, 10.0)?;
    Ok(format!(
        "N = {}, M = 2; M = 1 exits 3, M = 2 certifies at rate {:.2}",
        report.partition.n_total,
        cert["fitted_rate"].as_f64().unwrap_or(f64::NAN)
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("root formula oracle", root_formula),
        ("slow-branch asymptotics", asymptotics),
        ("companion spectrum", companion_spectrum),
        ("controllability equivalence", controllability_equivalence),
        ("null-control steering", null_control),
        ("spectrum shift", spectrum_shift),
        ("ARE correctness", are_correctness),
        ("decay certification", decay_certification),
        ("cross-method simulation", cross_method),
        ("forcing translation", forcing_translation),
        ("fluid maps", fluid_maps),
        ("multiplicity exercise", multiplicity_exercise),
    ];
    let mut failures = 0;
    let total = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            Err(format!("panicked: {msg}"))
        });
        let secs = Duration::as_secs_f64(&t.elapsed());
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed in {:.1}s",
        criteria.len() - failures,
        total.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
