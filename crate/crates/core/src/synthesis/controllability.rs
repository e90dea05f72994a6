use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{controllability_gramian, numerical_rank_c, singular_values_c, DEFAULT_CELLS};
use crate::synthesis::TransformedSystem;

/// Relative singular-value threshold for slice ranks.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Threshold on `min eig / max eig` of the transformed Gramian.
pub const GRAMIAN_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceRank {
    pub slot: Option<usize>,
    pub eigenvalue: Complex64,
    /// Number of independent directions that must be reachable (geometric
    /// multiplicity; equals the group multiplicity when semisimple).
    pub required: usize,
    /// Rank of the rows sitting at the bottom of each Jordan block.
    pub rank: usize,
    /// Rank of all rows belonging to the eigenvalue.
    pub full_slice_rank: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub semisimple: bool,
    pub slices: Vec<SliceRank>,
    pub pass: bool,
}

impl RankReport {
    pub fn first_failure(&self) -> Option<&SliceRank> {
        self.slices.iter().find(|s| !s.pass)
    }
}

/// Rank test on the slices of `Q_bar`: every eigenvalue needs its
/// block-bottom rows to have rank equal to its number of Jordan blocks.
pub fn rank_conditions(t: &TransformedSystem) -> RankReport {
    let scale = singular_values_c(&t.q_bar).first().copied().unwrap_or(0.0);
    let slices: Vec<SliceRank> = t
        .clusters
        .iter()
        .map(|c| {
            let rank = numerical_rank_c(&t.slice(&c.control_rows), RANK_REL_TOL, scale);
            let full_slice_rank = numerical_rank_c(&t.slice(&c.rows), RANK_REL_TOL, scale);
            let required = c.geometric();
            SliceRank {
                slot: c.slot,
                eigenvalue: c.value,
                required,
                rank,
                full_slice_rank,
                pass: rank >= required,
            }
        })
        .collect();
    let pass = slices.iter().all(|s| s.pass);
    RankReport {
        semisimple: t.semisimple,
        slices,
        pass,
    }
}

/// Independent certificate: Gramian of `(P, Q)` over `[0, 1]` mapped into the
/// transformed coordinates, `R G R^H`, must be numerically positive definite.
pub fn kalman_observability_check(t: &TransformedSystem) -> bool {
    gramian_ratio(t) > GRAMIAN_REL_TOL
}

/// `min eig / max eig` of the transformed unit-horizon Gramian (1 when empty).
pub fn gramian_ratio(t: &TransformedSystem) -> f64 {
    let n = t.p.nrows();
    if n == 0 {
        return 1.0;
    }
    let g = controllability_gramian(&t.p, &t.q, 1.0, DEFAULT_CELLS);
    let gc = g.map(|x| Complex64::new(x, 0.0));
    let h = &t.transform * gc * t.transform.adjoint();
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let e = h.symmetric_eigenvalues();
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= 0.0 {
        return 0.0;
    }
    (lo / hi).max(0.0)
}

/// Real-coordinate Kalman matrix rank `[Q, PQ, ..., P^{n-1} Q]`, scaled per
/// block; a coarse cross-check for small systems.
pub fn kalman_rank(p: &DMatrix<f64>, q: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    if n == 0 {
        return 0;
    }
    let m = q.ncols();
    let mut k = DMatrix::zeros(n, n * m);
    let mut block = q.clone();
    for i in 0..n {
        let s = block.norm().max(1e-300);
        k.view_mut((0, i * m), (n, m)).copy_from(&(&block / s));
        block = p * block;
    }
    let s = crate::linalg::singular_values(&k);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > 1e-10 * top).count()
}
