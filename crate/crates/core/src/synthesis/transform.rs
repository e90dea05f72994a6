//! Diagonal or Jordan coordinates for a companion system and the grouping
//! of the transformed input matrix by eigenvalue.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cond2_c, eigenvalues, null_space_c, singular_values_c, to_complex, CMatrix};
use crate::spectral::{modal_roots, UnstablePartition};
use crate::synthesis::CompanionSystem;

/// Relative distance at which computed eigenvalues are clustered before the
/// nullity test decides whether they form one multiple eigenvalue. Defective
/// eigenvalues split by O(sqrt(eps)) in floating point.
pub const CLUSTER_REL_TOL: f64 = 1e-6;

/// Singular-value threshold (relative to the matrix scale) for null spaces.
pub const NULLITY_REL_TOL: f64 = 1e-10;

/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_TRANSFORM_COND: f64 = 1e12;

/// One distinct eigenvalue of `P` with its Jordan structure.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenCluster {
    pub value: Complex64,
    pub algebraic: usize,
    /// Sizes of the Jordan blocks; all ones when semisimple.
    pub block_sizes: Vec<usize>,
    /// Rows of `q_bar` belonging to this eigenvalue.
    pub rows: Vec<usize>,
    /// Row of `q_bar` at the bottom of each Jordan block.
    pub control_rows: Vec<usize>,
    /// 1-based group slot: `k` for `-mu_k^+`, `k + l` for `-mu_k^-`.
    pub slot: Option<usize>,
}

impl EigenCluster {
    pub fn geometric(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn is_semisimple(&self) -> bool {
        self.block_sizes.iter().all(|&s| s == 1)
    }
}

/// `P = R^{-1} J R`, `Z = R X`, `Z' = J Z + Q_bar w`.
#[derive(Clone, Debug)]
pub struct TransformedSystem {
    pub semisimple: bool,
    /// `R` (inverse of the eigen/Jordan basis).
    pub transform: CMatrix,
    /// Diagonal `D` or Jordan matrix `J`.
    pub jordan: CMatrix,
    /// `R Q`.
    pub q_bar: CMatrix,
    pub clusters: Vec<EigenCluster>,
    /// Condition number of the column-normalized basis.
    pub condition: f64,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl TransformedSystem {
    /// Rows of `q_bar` for one cluster, as a `rows x M` matrix.
    pub fn slice(&self, rows: &[usize]) -> CMatrix {
        let m = self.q_bar.ncols();
        CMatrix::from_fn(rows.len(), m, |i, j| self.q_bar[(rows[i], j)])
    }
}

fn cluster_values(eigs: &[Complex64]) -> Vec<Vec<Complex64>> {
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for &e in eigs {
        let hit = clusters.iter_mut().find(|c| {
            let mean = c.iter().sum::<Complex64>() / c.len() as f64;
            (mean - e).norm() <= CLUSTER_REL_TOL * e.norm().max(1.0)
        });
        match hit {
            Some(c) => c.push(e),
            None => clusters.push(vec![e]),
        }
    }
    clusters
}

fn rank_of_columns(cols: &[DVector<Complex64>]) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let normalized: Vec<DVector<Complex64>> = cols
        .iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                c / Complex64::new(n, 0.0)
            } else {
                c.clone()
            }
        })
        .collect();
    let m = CMatrix::from_columns(&normalized);
    let s = singular_values_c(&m);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > 1e-8 * top.max(1e-300)).count()
}

/// Jordan chains `[A^{L-1} v, ..., A v, v]` for one eigenvalue, where
/// `A = P - value I`. Returns `None` when the nullities do not reach the
/// algebraic multiplicity.
fn jordan_chains(
    p: &CMatrix,
    value: Complex64,
    algebraic: usize,
    scale: f64,
) -> Option<Vec<Vec<DVector<Complex64>>>> {
    let n = p.nrows();
    let a = p - CMatrix::identity(n, n) * value;
    let tol = NULLITY_REL_TOL * scale;

    let mut null_bases: Vec<CMatrix> = vec![CMatrix::zeros(n, 0)];
    let mut power = CMatrix::identity(n, n);
    let mut dims = vec![0usize];
    for k in 1..=algebraic {
        power = &a * &power;
        let tol_k = tol * scale.powi(k as i32 - 1);
        let basis = null_space_c(&power, tol_k);
        let d = basis.ncols().min(algebraic);
        if d <= *dims.last().unwrap() {
            break;
        }
        dims.push(d);
        null_bases.push(basis);
        if d == algebraic {
            break;
        }
    }
    if *dims.last().unwrap() != algebraic {
        return None;
    }
    let top = dims.len() - 1;

    // chains[i] = (generator, length)
    let mut chains: Vec<(DVector<Complex64>, usize)> = Vec::new();
    for level in (1..=top).rev() {
        let needed = dims[level] - dims[level - 1];
        let mut span: Vec<DVector<Complex64>> =
            null_bases[level - 1].column_iter().map(|c| c.into_owned()).collect();
        let mut at_level = 0;
        for (g, len) in &chains {
            let mut v = g.clone();
            for _ in 0..(len - level) {
                v = &a * v;
            }
            span.push(v);
            at_level += 1;
        }
        let mut base_rank = rank_of_columns(&span);
        for c in null_bases[level].column_iter() {
            if at_level >= needed {
                break;
            }
            let c = c.into_owned();
            span.push(c.clone());
            let r = rank_of_columns(&span);
            if r > base_rank {
                base_rank = r;
                chains.push((c, level));
                at_level += 1;
            } else {
                span.pop();
            }
        }
        if at_level != needed {
            return None;
        }
    }

    Some(
        chains
            .into_iter()
            .map(|(g, len)| {
                let mut cols = vec![g];
                for _ in 1..len {
                    let next = &a * cols.last().unwrap();
                    cols.push(next);
                }
                cols.reverse();
                cols
            })
            .collect(),
    )
}

/// Diagonalizes `P` when every eigenvalue is semisimple and otherwise builds
/// the Jordan basis; groups the rows of `R Q` by eigenvalue.
pub fn transform_system(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<TransformedSystem> {
    let n = p.nrows();
    if q.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "input matrix has {} rows, system has {n}",
            q.nrows()
        )));
    }
    if n == 0 {
        return Ok(TransformedSystem {
            semisimple: true,
            transform: CMatrix::zeros(0, 0),
            jordan: CMatrix::zeros(0, 0),
            q_bar: CMatrix::zeros(0, q.ncols()),
            clusters: Vec::new(),
            condition: 1.0,
            p: p.clone(),
            q: q.clone(),
        });
    }
    let pc = to_complex(p);
    let scale = p.norm().max(1.0);
    let eigs = eigenvalues(p);

    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut clusters = Vec::new();
    let mut pending: Vec<Vec<Complex64>> = cluster_values(&eigs);
    while let Some(group) = pending.pop() {
        let value = group.iter().sum::<Complex64>() / group.len() as f64;
        match jordan_chains(&pc, value, group.len(), scale) {
            Some(chains) => {
                let mut rows = Vec::new();
                let mut control_rows = Vec::new();
                let mut block_sizes = Vec::new();
                for chain in chains {
                    block_sizes.push(chain.len());
                    for col in chain {
                        rows.push(columns.len());
                        columns.push(col);
                    }
                    control_rows.push(columns.len() - 1);
                }
                clusters.push(EigenCluster {
                    value,
                    algebraic: group.len(),
                    block_sizes,
                    rows,
                    control_rows,
                    slot: None,
                });
            }
            None if group.len() > 1 => {
                // Not a genuine multiple eigenvalue: treat members separately.
                pending.extend(group.into_iter().map(|e| vec![e]));
            }
            None => {
                return Err(Error::IllConditionedTransform(f64::INFINITY));
            }
        }
    }
    if columns.len() != n {
        return Err(Error::IllConditionedTransform(f64::INFINITY));
    }

    let basis = CMatrix::from_columns(&columns);
    let normalized = CMatrix::from_columns(
        &columns
            .iter()
            .map(|c| c / Complex64::new(c.norm(), 0.0))
            .collect::<Vec<_>>(),
    );
    let condition = cond2_c(&normalized);
    if !(condition <= MAX_TRANSFORM_COND) {
        return Err(Error::IllConditionedTransform(condition));
    }
    let transform = basis
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditionedTransform(f64::INFINITY))?;
    let jordan = &transform * &pc * &basis;
    let q_bar = &transform * to_complex(q);
    clusters.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let semisimple = clusters.iter().all(EigenCluster::is_semisimple);
    Ok(TransformedSystem {
        semisimple,
        transform,
        jordan,
        q_bar,
        clusters,
        condition,
        p: p.clone(),
        q: q.clone(),
    })
}

/// Transforms the companion system of the unstable block and tags each
/// eigenvalue cluster with its group slot (`k` for `-mu_k^+`, `k + l` for
/// `-mu_k^-`).
pub fn transform_and_group(
    companion: &CompanionSystem,
    partition: &UnstablePartition,
) -> Result<TransformedSystem> {
    let mut t = transform_system(&companion.p_2n, &companion.q_2nm)?;
    let l = partition.groups.len();
    let targets: Vec<(usize, Complex64)> = partition
        .groups
        .iter()
        .enumerate()
        .flat_map(|(k, g)| {
            let r = modal_roots(g.lambda, &companion.kernel);
            [(k + 1, -r.mu_plus), (k + 1 + l, -r.mu_minus)]
        })
        .collect();
    for cluster in &mut t.clusters {
        let best = targets
            .iter()
            .map(|(slot, v)| (*slot, (cluster.value - v).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((slot, d)) = best {
            if d <= CLUSTER_REL_TOL * cluster.value.norm().max(1.0) {
                cluster.slot = Some(slot);
            }
        }
    }
    t.clusters.sort_by_key(|c| c.slot.unwrap_or(usize::MAX));
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{partition_spectrum, MemoryKernel, Spectrum, SpectrumEntry};
    use crate::synthesis::{build_companion, companion_from_modes, default_actuators};

    #[test]
    fn distinct_real_eigenvalues() {
        let k = MemoryKernel::new(0.0, 1.0).unwrap();
        let c = companion_from_modes(&[3.0], &k, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let t = transform_system(&c.p_2n, &c.q_2nm).unwrap();
        assert!(t.semisimple);
        let mut d: Vec<f64> = (0..2).map(|i| t.jordan[(i, i)].re).collect();
        d.sort_by(f64::total_cmp);
        assert!((d[0] + 3.0).abs() < 1e-12 && (d[1] + 1.0).abs() < 1e-12);
        assert!(t.jordan[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn repeated_identical_modes_are_semisimple() {
        let k = MemoryKernel::new(1.0, 1.0).unwrap();
        let c = companion_from_modes(&[1.0, 1.0], &k, DMatrix::identity(2, 2)).unwrap();
        let t = transform_system(&c.p_2n, &c.q_2nm).unwrap();
        assert!(t.semisimple);
        assert_eq!(t.clusters.len(), 2);
        for cl in &t.clusters {
            assert_eq!(cl.algebraic, 2);
            assert_eq!(cl.geometric(), 2);
            assert!((cl.value.re + 1.0).abs() < 1e-10);
            assert!((cl.value.im.abs() - 1.0).abs() < 1e-10);
        }
        // R P R^{-1} diagonal.
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(t.jordan[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn defective_block_takes_jordan_path() {
        // Double root -1 of r^2 + 2 r + 1.
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
        let q = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let t = transform_system(&p, &q).unwrap();
        assert!(!t.semisimple);
        assert_eq!(t.clusters.len(), 1);
        assert_eq!(t.clusters[0].block_sizes, vec![2]);
        assert!((t.jordan[(0, 0)].re + 1.0).abs() < 1e-7);
        assert!((t.jordan[(0, 1)].re - 1.0).abs() < 1e-7);
        assert!(t.jordan[(1, 0)].norm() < 1e-7);
        // Reconstruction P = R^{-1} J R.
        let back = t.transform.clone().try_inverse().unwrap() * &t.jordan * &t.transform;
        assert!((back - to_complex(&p)).norm() < 1e-8);
    }

    #[test]
    fn companion_slots_follow_groups() {
        let s = Spectrum::new(vec![
            SpectrumEntry::new(0.2, 1, "a"),
            SpectrumEntry::new(0.5, 2, "b"),
            SpectrumEntry::new(80.0, 1, "c"),
        ])
        .unwrap();
        let k = MemoryKernel::new(1.0, 4.0).unwrap();
        let p = partition_spectrum(&s, &k, 1.5).unwrap();
        assert_eq!(p.n_total, 3);
        let a = default_actuators(&p, None).unwrap();
        let c = build_companion(&p, &k, &a, &s).unwrap();
        let t = transform_and_group(&c, &p).unwrap();
        let slots: Vec<Option<usize>> = t.clusters.iter().map(|c| c.slot).collect();
        assert_eq!(slots, vec![Some(1), Some(2), Some(3), Some(4)]);
        assert_eq!(t.clusters[1].algebraic, 2);
        assert_eq!(t.clusters[3].algebraic, 2);
    }
}
