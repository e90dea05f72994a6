//! Dense numerical kernels shared by the synthesis, Riccati and simulation
//! modules: matrix exponential, Gauss-Legendre quadrature, numerical rank,
//! and the matrix sign iteration used for invariant-subspace solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Gauss-Legendre nodes on [-1, 1], 8 points.
pub const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

/// Gauss-Legendre weights matching [`GL8_NODES`].
pub const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Default number of composite cells for Gramian-type quadratures.
pub const DEFAULT_CELLS: usize = 64;

/// Nodes and weights of the composite 8-point Gauss-Legendre rule on
/// `[a, b]` split into `cells` equal cells.
pub fn composite_gl(a: f64, b: f64, cells: usize) -> Vec<(f64, f64)> {
    let cells = cells.max(1);
    let h = (b - a) / cells as f64;
    let mut out = Vec::with_capacity(cells * 8);
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * h;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Scalar composite Gauss-Legendre integral.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, cells: usize, mut f: F) -> f64 {
    composite_gl(a, b, cells)
        .into_iter()
        .map(|(t, w)| w * f(t))
        .sum()
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371_920_351_148_152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-s);
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.clone().complex_eigenvalues().iter().copied().collect()
}

/// Largest distance in a greedy nearest-neighbour matching of two multisets
/// of complex numbers. Returns `f64::INFINITY` when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best_d {
                    best_d = d;
                    best = Some(j);
                }
            }
        }
        if let Some(j) = best {
            used[j] = true;
        }
        worst = worst.max(best_d);
    }
    worst
}

/// Singular values sorted in decreasing order.
pub fn singular_values_c(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Singular values of a real matrix, decreasing.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol * scale`.
pub fn numerical_rank_c(a: &CMatrix, rel_tol: f64, scale: f64) -> usize {
    let s = singular_values_c(a);
    s.iter().filter(|&&x| x > rel_tol * scale).count()
}

/// 2-norm condition number of a complex square matrix.
pub fn cond2_c(a: &CMatrix) -> f64 {
    let s = singular_values_c(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Orthonormal basis of the numerical null space of `a` (columns), using
/// the threshold `tol` on singular values.
pub fn null_space_c(a: &CMatrix, tol: f64) -> CMatrix {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMatrix::identity(n, n);
    }
    // Pad to square so the SVD returns a full right basis.
    let padded = if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            cols.push(v_t.row(i).adjoint());
        }
    }
    // Rows of v_t beyond the singular-value count (only when nrows > ncols
    // never happens after padding) are ignored.
    if cols.is_empty() {
        return CMatrix::zeros(n, 0);
    }
    CMatrix::from_columns(&cols)
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

fn log_abs_det(lu_u: &DMatrix<f64>) -> f64 {
    lu_u.diagonal().iter().map(|d| d.abs().ln()).sum()
}

/// Matrix sign function by the scaled Newton iteration
/// `Z <- (c Z + (c Z)^{-1}) / 2` with determinant scaling.
pub fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::SolverFailure("singular iterate in sign iteration".into()))?;
        let c = if scaling {
            let lu = z.clone().lu();
            let ld = log_abs_det(&lu.u());
            if ld.is_finite() {
                (-ld / n as f64).exp()
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&z * c + &inv / c) * 0.5;
        let diff = norm1(&(&next - &z));
        let size = norm1(&next);
        z = next;
        if !size.is_finite() {
            return Err(Error::SolverFailure("sign iteration diverged".into()));
        }
        if diff <= 1e-2 * size {
            scaling = false;
        }
        if diff <= 1e-13 * size {
            return Ok(z);
        }
    }
    // Accept a slowly converged iterate if it is an involution to good accuracy.
    let check = norm1(&(&z * &z - DMatrix::identity(n, n)));
    if check < 1e-8 {
        Ok(z)
    } else {
        Err(Error::SolverFailure(format!(
            "sign iteration did not converge (|Z^2 - I| = {check:.3e})"
        )))
    }
}

/// Solves `F^T X + X F + C = 0` for Hurwitz `F` through the sign of the
/// block matrix `[[F^T, C], [0, -F]]`.
pub fn lyapunov(f: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&f.transpose());
    block.view_mut((0, n), (n, n)).copy_from(c);
    block.view_mut((n, n), (n, n)).copy_from(&(-f));
    let z = matrix_sign(&block)?;
    let x = z.view((0, n), (n, n)) * 0.5;
    Ok((&x + x.transpose()) * 0.5)
}

/// Symmetric part.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    if a.nrows() == 0 {
        return (0.0, 0.0);
    }
    let e = symmetrize(a).symmetric_eigenvalues();
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Finite-horizon controllability Gramian `int_0^T e^{Ps} Q Q^T e^{P^T s} ds`
/// by composite Gauss-Legendre quadrature.
pub fn controllability_gramian(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    horizon: f64,
    cells: usize,
) -> DMatrix<f64> {
    let n = p.nrows();
    let mut g = DMatrix::zeros(n, n);
    if n == 0 {
        return g;
    }
    let cells = cells.max(1);
    let h = horizon / cells as f64;
    let step = expm(&(p * h));
    let offsets: Vec<DMatrix<f64>> = GL8_NODES
        .iter()
        .map(|x| expm(&(p * (0.5 * h * (1.0 + x)))))
        .collect();
    let qqt = q * q.transpose();
    let mut start = DMatrix::<f64>::identity(n, n);
    for _ in 0..cells {
        for (off, w) in offsets.iter().zip(GL8_WEIGHTS.iter()) {
            let e = off * &start;
            g += (&e * &qqt * e.transpose()) * (0.5 * h * w);
        }
        start = &step * &start;
    }
    symmetrize(&g)
}

/// Composite-Simpson (odd sample count) or trapezoid integral of samples on
/// a uniform grid.
pub fn integrate_samples(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len().min(values.len());
    if n < 2 {
        return 0.0;
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    if n % 2 == 1 && n >= 3 {
        let mut s = values[0] + values[n - 1];
        for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    } else {
        let inner: f64 = values[1..n - 1].iter().sum();
        h * (inner + 0.5 * (values[0] + values[n - 1]))
    }
}

/// Euclidean norm of a vector.
pub fn norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&d);
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert!((e[(2, 2)] - 0.5f64.exp()).abs() < 1e-14);

        let t = 3.0;
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = expm(&rot);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-13);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[-50.0, 1.0, 0.0, -49.0]);
        let e = expm(&a);
        // Closed form for upper-triangular with distinct diagonal.
        let e1 = (-50f64).exp();
        let e2 = (-49f64).exp();
        let off = (e2 - e1) / (-49.0 + 50.0);
        assert!((e[(0, 1)] - off).abs() < 1e-12 * off.abs());
        assert!((e[(1, 1)] - e2).abs() < 1e-12 * e2);
    }

    #[test]
    fn gauss_legendre_exact_for_degree_15() {
        let v = integrate(0.0, 2.0, 1, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let e = integrate(0.0, 1.0, 4, |x| (-3.0 * x).exp());
        assert!((e - (1.0 - (-3f64).exp()) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_gramian_matches_closed_form() {
        let a = -1.0;
        let p = DMatrix::from_element(1, 1, a);
        let q = DMatrix::from_element(1, 1, 1.0);
        let g = controllability_gramian(&p, &q, 1.0, 64);
        let exact = ((2.0 * a).exp() - 1.0) / (2.0 * a);
        assert!((g[(0, 0)] - exact).abs() < 1e-14);
    }

    #[test]
    fn sign_of_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.1, 7.0, -1e-3]));
        let s = matrix_sign(&h).unwrap();
        let expect = [-1.0, 1.0, 1.0, -1.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((s[(i, i)] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_residual() {
        let f = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -2.0]);
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let x = lyapunov(&f, &c).unwrap();
        let r = f.transpose() * &x + &x * &f + &c;
        assert!(r.norm() < 1e-12 * x.norm());
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = to_complex(&DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]));
        let ns = null_space_c(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
    }

    #[test]
    fn simpson_on_polynomial() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| x * x).collect();
        assert!((integrate_samples(&t, &v) - 1.0 / 3.0).abs() < 1e-14);
    }
}
