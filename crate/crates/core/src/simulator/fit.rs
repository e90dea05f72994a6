use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::{NormKind, Trajectory};

pub const MIN_FIT_SAMPLES: usize = 10;

/// Log-linear fit `norm(t) ~ constant * exp(-rate t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `+inf` when the norm vanishes on the window.
    pub rate: f64,
    pub constant: f64,
    /// `constant / norm(0)` (0 when `norm(0) = 0`).
    pub relative_constant: f64,
    pub samples: usize,
    /// The log-norm is not monotone on the window.
    pub oscillating: bool,
    pub window: (f64, f64),
}

/// Least-squares fit of `log(max(norm, 1e-300))` against `t` on `window`
/// (default: second half of the horizon).
pub fn fit_norms(times: &[f64], norms: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let n = times.len().min(norms.len());
    let end = times.last().copied().unwrap_or(0.0);
    let (lo, hi) = window.unwrap_or((0.5 * end, end));
    let idx: Vec<usize> = (0..n).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooShort(idx.len()));
    }
    let norm0 = norms.first().copied().unwrap_or(0.0);
    if idx.iter().all(|&i| norms[i] == 0.0) {
        return Ok(DecayFit {
            rate: f64::INFINITY,
            constant: 0.0,
            relative_constant: 0.0,
            samples: idx.len(),
            oscillating: false,
            window: (lo, hi),
        });
    }
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| norms[i].max(1e-300).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let oscillating = diffs.iter().any(|d| *d > 0.0) && diffs.iter().any(|d| *d < 0.0);
    let constant = intercept.exp();
    Ok(DecayFit {
        rate: -slope,
        constant,
        relative_constant: if norm0 > 0.0 { constant / norm0 } else { 0.0 },
        samples: idx.len(),
        oscillating,
        window: (lo, hi),
    })
}

pub fn fit_decay_rate(
    trajectory: &Trajectory,
    kind: NormKind,
    window: Option<(f64, f64)>,
) -> Result<DecayFit> {
    fit_norms(&trajectory.grid, &trajectory.norms(kind), window)
}
