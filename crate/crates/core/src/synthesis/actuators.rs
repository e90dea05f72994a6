use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::UnstablePartition;

/// Upper bound on randomized coefficient draws.
pub const MAX_SEARCH_ATTEMPTS: usize = 1000;

/// Actuator directions `psi_1..psi_M` described by their modal projections.
///
/// Row `j`, column `i` of `modal_coefficients` holds `(B psi_i, phi_j)`.
/// The matrix has at least as many rows as the unstable block; modes past
/// the last row have zero projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSet {
    pub count: usize,
    #[serde(with = "crate::io::matrix_rows")]
    pub modal_coefficients: DMatrix<f64>,
    pub description: String,
}

impl ActuatorSet {
    pub fn new(modal_coefficients: DMatrix<f64>, description: impl Into<String>) -> Self {
        Self {
            count: modal_coefficients.ncols(),
            modal_coefficients,
            description: description.into(),
        }
    }

    /// Coefficients for the first `k` modes, zero-padded.
    pub fn rows(&self, k: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(k, self.count);
        let r = k.min(self.modal_coefficients.nrows());
        out.view_mut((0, 0), (r, self.count))
            .copy_from(&self.modal_coefficients.view((0, 0), (r, self.count)));
        out
    }

    pub fn validate(&self, partition: &UnstablePartition) -> Result<()> {
        if self.count != self.modal_coefficients.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "actuator count {} does not match {} coefficient columns",
                self.count,
                self.modal_coefficients.ncols()
            )));
        }
        if self.modal_coefficients.nrows() < partition.n_total {
            return Err(Error::DimensionMismatch(format!(
                "actuator coefficients cover {} modes, the unstable block has {}",
                self.modal_coefficients.nrows(),
                partition.n_total
            )));
        }
        Ok(())
    }
}

/// Eigenbasis actuators for the semisimple case.
///
/// With `B` the identity and `psi_i` built from unstable eigenfunctions,
/// actuator `i` is aligned with the `i`-th mode of every group, so each
/// group's coefficient slice contains an identity block of size `m_k`.
/// Columns are normalized. `count` defaults to `m_max` when `None`.
pub fn default_actuators(partition: &UnstablePartition, count: Option<usize>) -> Result<ActuatorSet> {
    let m = count.unwrap_or(partition.m_max);
    let n = partition.n_total;
    if m > n.max(partition.m_max) && n > 0 {
        return Err(Error::InvalidParameter(format!(
            "{m} actuators exceed the {n} unstable modes"
        )));
    }
    let mut c = DMatrix::zeros(n, m);
    for g in &partition.groups {
        for i in 0..g.multiplicity.min(m) {
            c[(g.first_mode + i, i)] = 1.0;
        }
    }
    for mut col in c.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
    let description = if m == n {
        "eigenbasis: one actuator per unstable mode".to_string()
    } else {
        "eigenbasis: actuator i aligned with the i-th mode of every group".to_string()
    };
    Ok(ActuatorSet::new(c, description))
}

/// Randomized coefficients for the non-semisimple case: each actuator is a
/// unit-sphere combination of the unstable eigenfunctions, redrawn until
/// `accept` returns true.
pub fn randomized_actuators<F>(
    n_modes: usize,
    count: usize,
    seed: u64,
    mut accept: F,
) -> Result<(ActuatorSet, usize)>
where
    F: FnMut(&DMatrix<f64>) -> Result<bool>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=MAX_SEARCH_ATTEMPTS {
        let mut c = DMatrix::zeros(n_modes, count);
        for i in 0..count {
            let col: DVector<f64> =
                DVector::from_fn(n_modes, |_, _| StandardNormal.sample(&mut rng));
            let nrm = col.norm();
            if nrm > 0.0 {
                c.set_column(i, &(col / nrm));
            }
        }
        if accept(&c)? {
            return Ok((
                ActuatorSet::new(
                    c,
                    format!("randomized unit-sphere coefficients (seed {seed}, attempt {attempt})"),
                ),
                attempt,
            ));
        }
    }
    Err(Error::SearchFailed {
        attempts: MAX_SEARCH_ATTEMPTS,
        seed,
    })
}
