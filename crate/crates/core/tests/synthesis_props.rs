use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pidectl_core::linalg::{eigenvalues, expm, multiset_distance, singular_values};
use pidectl_core::spectral::{modal_roots, partition_spectrum, MemoryKernel, Spectrum};
use pidectl_core::synthesis::{
    build_companion, companion_from_modes, default_actuators, kalman_observability_check,
    min_energy_control_on, ode_residual, rank_conditions, recover_v, steer_modal_state,
    transform_system,
};
use pidectl_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random real system in Jordan coordinates: blocks of size 1 or 2, some
/// eigenvalues carrying two blocks. Returns `(P, Q, expected controllable)`.
fn random_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, bool) {
    let m = rng.random_range(1..=2);
    // Single-input Gramians of larger Jordan systems sit below the threshold.
    let n_values = rng.random_range(1..=m + 1);
    let mut structure: Vec<(f64, Vec<usize>)> = Vec::new();
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
        dim += blocks.iter().sum::<usize>();
        structure.push((value, blocks));
    }
    let mut j = DMatrix::zeros(dim, dim);
    let mut bottoms: Vec<Vec<usize>> = Vec::new();
    let mut at = 0;
    for (value, blocks) in &structure {
        let mut b = Vec::new();
        for &size in blocks {
            for r in 0..size {
                j[(at + r, at + r)] = *value;
                if r + 1 < size {
                    j[(at + r, at + r + 1)] = 1.0;
                }
            }
            b.push(at + size - 1);
            at += size;
        }
        bottoms.push(b);
    }
    // Keep controllable slices well away from the rank threshold.
    let slice_min = |q: &DMatrix<f64>, rows: &[usize]| {
        let slice = DMatrix::from_fn(rows.len(), m, |i, c| q[(rows[i], c)]);
        let s = singular_values(&slice);
        if s.len() < rows.len() { 0.0 } else { s[rows.len() - 1] }
    };
    let mut q_bar = loop {
        let q = gauss(rng, dim, m);
        if bottoms.iter().all(|r| r.len() > m || slice_min(&q, r) > 0.5) {
            break q;
        }
    };
    if rng.random_bool(0.5) {
        let pick = rng.random_range(0..structure.len());
        let rows = &bottoms[pick];
        if rows.len() == 1 {
            q_bar.row_mut(rows[0]).fill(0.0);
        } else {
            let c = rng.random_range(-2.0..2.0);
            let first = q_bar.row(rows[0]).into_owned();
            q_bar.row_mut(rows[1]).copy_from(&(first * c));
        }
    }
    let expected = bottoms.iter().all(|rows| rows.len() <= m && slice_min(&q_bar, rows) > 1e-8);
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

#[test]
fn rank_test_agrees_with_gramian_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut pass, mut fail, mut defective) = (0, 0, 0);
    for i in 0..100 {
        let (p, q, expected) = random_instance(&mut rng);
        let t = transform_system(&p, &q).unwrap();
        if !t.semisimple {
            defective += 1;
        }
        let rank = rank_conditions(&t).pass;
        let gram = kalman_observability_check(&t);
        assert_eq!(rank, expected, "instance {i}: rank test");
        assert_eq!(gram, expected, "instance {i}: gramian test, ratio {:e}, dim {}", pidectl_core::synthesis::gramian_ratio(&t), p.nrows());
        if expected {
            pass += 1;
        } else {
            fail += 1;
        }
    }
    assert!(pass > 20 && fail > 20 && defective > 10, "{pass} {fail} {defective}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn companion_spectrum_is_minus_roots(
        lambdas in proptest::collection::vec(0.05f64..20.0, 1..6),
        b in 0.1f64..3.0,
        delta in 0.2f64..6.0,
    ) {
        let k = MemoryKernel::new(b, delta).unwrap();
        let c = DMatrix::identity(lambdas.len(), 1);
        let comp = companion_from_modes(&lambdas, &k, c).unwrap();
        let mut want = Vec::new();
        for &l in &lambdas {
            let r = modal_roots(l, &k);
            want.push(-r.mu_plus);
            want.push(-r.mu_minus);
        }
        let got = eigenvalues(&comp.p_2n);
        let scale = want.iter().map(|z: &Complex64| z.norm()).fold(1.0, f64::max);
        // Near-double roots lose half the digits.
        let tol = 1e-7 * scale + lambdas.iter().map(|&l| {
            let g = modal_roots(l, &k).gap();
            if g < 1e-3 { 1e-6 } else { 0.0 }
        }).sum::<f64>();
        prop_assert!(multiset_distance(&got, &want) <= tol);
    }
}

fn example_companion() -> (pidectl_core::synthesis::CompanionSystem, usize) {
    let s = Spectrum::from_eigenvalues(&[0.3, 0.9, 1.7, 10.0, 16.0]).unwrap();
    let k = MemoryKernel::new(1.0, 3.0).unwrap();
    let part = partition_spectrum(&s, &k, 2.0).unwrap();
    let act = default_actuators(&part, Some(1)).unwrap();
    let comp = build_companion(&part, &k, &act, &s).unwrap();
    (comp, part.n_total)
}

#[test]
fn null_control_reaches_zero() {
    let (comp, n) = example_companion();
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x0 = DVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0));
        let nc = min_energy_control_on(&comp, &x0, 2.0, 2000).unwrap();
        let end = nc.terminal_state();
        assert!(end.norm() <= 1e-6 * x0.norm(), "terminal {}", end.norm());
        assert!(nc.v.column(nc.grid.len() - 1).norm() == 0.0);
    }
}

#[test]
fn energy_matches_discrete_least_squares() {
    let (comp, n) = example_companion();
    let p = &comp.p_2n;
    let q = &comp.q_2nm;
    let x0 = DVector::from_fn(2 * n, |i, _| 1.0 / (1.0 + i as f64));
    let horizon = 2.0;
    let nc = min_energy_control_on(&comp, &x0, horizon, 1000).unwrap();

    let cells = 400;
    let h = horizon / cells as f64;
    let dim = p.nrows();
    let m = q.ncols();
    let mut aug = DMatrix::zeros(2 * dim, 2 * dim);
    aug.view_mut((0, 0), (dim, dim)).copy_from(&(p * h));
    aug.view_mut((0, dim), (dim, dim)).fill_with_identity();
    aug.view_mut((0, dim), (dim, dim)).scale_mut(h);
    let cell_int = expm(&aug).view((0, dim), (dim, dim)).into_owned() * q;
    let mut phi = DMatrix::zeros(dim, cells * m);
    for k in 0..cells {
        let e = expm(&(p * (horizon - (k + 1) as f64 * h)));
        phi.view_mut((0, k * m), (dim, m)).copy_from(&(e * &cell_int));
    }
    let target = -(expm(&(p * horizon)) * &x0);
    let gram = &phi * phi.transpose();
    let sol = gram.clone().lu().solve(&target).unwrap();
    let w_ls = phi.transpose() * &sol;
    let e_ls = h * w_ls.norm_squared();
    assert!(((e_ls - nc.energy) / nc.energy).abs() < 5e-3, "{e_ls} vs {}", nc.energy);

    // Zero-steering perturbations only add energy.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let z = DVector::from_fn(cells * m, |_, _| rng.random_range(-1.0..1.0));
        let proj = &z - phi.transpose() * gram.clone().lu().solve(&(&phi * &z)).unwrap();
        let e = h * (&w_ls + proj * 0.1).norm_squared();
        assert!(e > e_ls);
    }
}

#[test]
fn physical_control_solves_its_ode() {
    let (comp, n) = example_companion();
    let alpha0 = DVector::from_fn(n, |i, _| 1.0 - 0.3 * i as f64);
    let nc = steer_modal_state(&comp, &alpha0, 2.0, 2000).unwrap();
    let v = recover_v(&nc.grid, &nc.w, nc.delta);
    let scale = nc.v.amax().max(1e-300);
    // Quadrature of sampled w is second order in the step.
    let e1 = (&v - &nc.v).amax() / scale;
    let fine = steer_modal_state(&comp, &alpha0, 2.0, 4000).unwrap();
    let e2 = (recover_v(&fine.grid, &fine.w, fine.delta) - &fine.v).amax() / scale;
    assert!(e2 < 1e-3 && (e1 / e2 - 4.0).abs() < 0.2, "{e1} {e2}");
    assert!(ode_residual(&nc.grid, &nc.v, &nc.w, nc.delta) / nc.w.amax() < 1e-6);
    for (k, &t) in nc.grid.iter().enumerate().step_by(97) {
        assert!((nc.v_at(t) - nc.v.column(k)).amax() <= 1e-9 * scale);
    }
    // Consistent initial velocity: a'(0) = -lambda a(0) + C v(0).
    let v0 = nc.v_at(0.0);
    for i in 0..n {
        let want = -comp.lambdas[i] * alpha0[i] + (comp.c_nm.row(i) * &v0)[0];
        assert!((nc.x0[n + i] - want).abs() < 1e-9 * (1.0 + want.abs()));
        assert!((nc.x0[i] - alpha0[i]).abs() < 1e-14);
    }
}

#[test]
fn tiny_horizon_is_rejected() {
    let (comp, n) = example_companion();
    let x0 = DVector::from_element(2 * n, 1.0);
    match min_energy_control_on(&comp, &x0, 1e-4, 10) {
        Err(Error::HorizonTooSmall(c)) => assert!(c > 1e14),
        other => panic!("expected horizon_too_small, got {other:?}"),
    }
}

#[test]
fn uncontrollable_pair_is_rejected() {
    let k = MemoryKernel::new(1.0, 3.0).unwrap();
    let comp = companion_from_modes(&[0.5, 0.5], &k, DMatrix::from_column_slice(2, 1, &[1.0, 1.0]))
        .unwrap();
    let x0 = DVector::from_element(4, 1.0);
    assert!(matches!(
        min_energy_control_on(&comp, &x0, 1.0, 10),
        Err(Error::GramianSingular)
    ));
}
