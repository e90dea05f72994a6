use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{check_degeneracy, modal_roots, MemoryKernel, Spectrum, UnstablePartition};
use crate::synthesis::ActuatorSet;

/// First-order realization `X' = P X + Q w` of the second-order modal
/// equations `a'' + (lambda + delta) a' + lambda (b + delta) a = C w`,
/// with state `X = (a, a')`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionSystem {
    /// `diag(lambda_j + delta)`.
    pub a_n: DMatrix<f64>,
    /// `diag(lambda_j (b + delta))`.
    pub b_n: DMatrix<f64>,
    pub c_nm: DMatrix<f64>,
    /// `[[0, I], [-B_N, -A_N]]`.
    pub p_2n: DMatrix<f64>,
    /// `[[0], [C_NM]]`.
    pub q_2nm: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    pub kernel: MemoryKernel,
}

impl CompanionSystem {
    pub fn dim(&self) -> usize {
        self.p_2n.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn inputs(&self) -> usize {
        self.q_2nm.ncols()
    }

    /// The multiset `{-mu_j^+, -mu_j^-}` predicted by the root formula.
    pub fn predicted_eigenvalues(&self) -> Vec<Complex64> {
        self.lambdas
            .iter()
            .flat_map(|&l| {
                let r = modal_roots(l, &self.kernel);
                [-r.mu_plus, -r.mu_minus]
            })
            .collect()
    }

    /// Companion state for modal data `a(0)` and `a'(0)`.
    pub fn state(&self, alpha: &DVector<f64>, alpha_dot: &DVector<f64>) -> DVector<f64> {
        let n = self.n_modes();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(alpha);
        x.rows_mut(n, n).copy_from(alpha_dot);
        x
    }
}

/// Assembles the companion matrices for arbitrary modal eigenvalues.
pub fn companion_from_modes(
    lambdas: &[f64],
    kernel: &MemoryKernel,
    c_nm: DMatrix<f64>,
) -> Result<CompanionSystem> {
    let n = lambdas.len();
    if c_nm.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix has {} rows for {n} modes",
            c_nm.nrows()
        )));
    }
    let m = c_nm.ncols();
    let a_n = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lambdas.iter().map(|l| l + kernel.delta),
    ));
    let b_n = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lambdas.iter().map(|l| l * (kernel.b + kernel.delta)),
    ));
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    p.view_mut((0, n), (n, n)).fill_with_identity();
    p.view_mut((n, 0), (n, n)).copy_from(&(-&b_n));
    p.view_mut((n, n), (n, n)).copy_from(&(-&a_n));
    let mut q = DMatrix::zeros(2 * n, m);
    q.view_mut((n, 0), (n, m)).copy_from(&c_nm);
    Ok(CompanionSystem {
        a_n,
        b_n,
        c_nm,
        p_2n: p,
        q_2nm: q,
        lambdas: lambdas.to_vec(),
        kernel: *kernel,
    })
}

/// Companion system of the unstable block.
pub fn build_companion(
    partition: &UnstablePartition,
    kernel: &MemoryKernel,
    actuators: &ActuatorSet,
    spectrum: &Spectrum,
) -> Result<CompanionSystem> {
    actuators.validate(partition)?;
    if actuators.count < partition.m_max {
        return Err(Error::DimensionMismatch(format!(
            "{} actuators cannot control a group of multiplicity {}",
            actuators.count, partition.m_max
        )));
    }
    let report = check_degeneracy(spectrum, kernel);
    if !report.is_empty() {
        return Err(Error::DegenerateSpectrum(format!("{report:?}")));
    }
    let lambdas = spectrum.mode_eigenvalues(partition.n_total);
    if lambdas.len() != partition.n_total {
        return Err(Error::DimensionMismatch(
            "partition does not belong to this spectrum".into(),
        ));
    }
    companion_from_modes(&lambdas, kernel, actuators.rows(partition.n_total))
}
