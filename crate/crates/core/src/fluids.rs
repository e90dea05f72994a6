//! Oldroyd-B and Jeffreys parameter maps, model spectra on the unit interval
//! and square, and indicator-supported actuators in the sine basis.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ForcingField;
use crate::spectral::{MemoryKernel, Spectrum, SpectrumEntry};
use crate::synthesis::ActuatorSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OldroydParams {
    pub nu: f64,
    pub kappa: f64,
    pub lambda_relax: f64,
}

/// Abstract data of an Oldroyd-B fluid: `A = -mu P Delta` and the scaled
/// kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OldroydAbstract {
    pub mu: f64,
    pub kernel: MemoryKernel,
    pub omega0: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must be positive")))
    }
}

/// `mu = 2 kappa / lambda`, `b = nu / kappa - 1 / lambda`, `delta = 1 / lambda`.
pub fn oldroyd_to_abstract(p: &OldroydParams) -> Result<OldroydAbstract> {
    positive("nu", p.nu)?;
    positive("kappa", p.kappa)?;
    positive("lambda", p.lambda_relax)?;
    let b = p.nu / p.kappa - 1.0 / p.lambda_relax;
    if !(b > 0.0) {
        return Err(Error::NonpositiveAmplitude(b));
    }
    let delta = 1.0 / p.lambda_relax;
    Ok(OldroydAbstract {
        mu: 2.0 * p.kappa / p.lambda_relax,
        kernel: MemoryKernel::new(b, delta)?,
        omega0: p.nu / p.kappa,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JeffreysParams {
    pub mu_visc: f64,
    pub kappa: f64,
    pub lambda_relax: f64,
    /// Modal coefficients of `div tau_0`.
    #[serde(default)]
    pub tau0: Vec<f64>,
}

/// Kernel `b = kappa / mu`, `delta = lambda` and forcing `e^{-lambda t} (div tau_0)_n`.
pub fn jeffreys_reduce(p: &JeffreysParams) -> Result<(MemoryKernel, ForcingField)> {
    positive("mu", p.mu_visc)?;
    positive("kappa", p.kappa)?;
    positive("lambda", p.lambda_relax)?;
    if p.tau0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("initial stress must be finite".into()));
    }
    let kernel = MemoryKernel::new(p.kappa / p.mu_visc, p.lambda_relax)?;
    let mut forcing = ForcingField::zero(p.tau0.len());
    if p.tau0.iter().any(|x| *x != 0.0) {
        forcing = forcing.with_transient(p.lambda_relax, p.tau0.clone());
    }
    Ok((kernel, forcing))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumModel {
    /// `mu j^2 pi^2` on the unit interval.
    Dirichlet1d,
    /// `mu (j^2 + k^2) pi^2` on the unit square, grouped by level.
    Square2d,
    User { entries: Vec<SpectrumEntry> },
}

/// Ordered pairs `(j, k)` of the first `levels` distinct values of
/// `j^2 + k^2`, grouped by level, `j` ascending inside a level.
pub fn square_levels(levels: usize) -> Vec<(u64, Vec<(usize, usize)>)> {
    let mut j_max: usize = 1;
    loop {
        let limit = (j_max * j_max + 1) as u64;
        let mut map: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
        for j in 1..=j_max {
            for k in 1..=j_max {
                let s = (j * j + k * k) as u64;
                if s <= limit {
                    map.entry(s).or_default().push((j, k));
                }
            }
        }
        if map.len() >= levels {
            return map.into_iter().take(levels).collect();
        }
        j_max += 1;
    }
}

pub fn model_spectrum(model: &SpectrumModel, scale: f64, n_modes: usize) -> Result<Spectrum> {
    positive("scale", scale)?;
    match model {
        SpectrumModel::Dirichlet1d => {
            if n_modes == 0 {
                return Err(Error::InvalidCount(n_modes));
            }
            Spectrum::new(
                (1..=n_modes)
                    .map(|j| SpectrumEntry::new(scale * (j * j) as f64 * PI * PI, 1, format!("j{j}")))
                    .collect(),
            )
        }
        SpectrumModel::Square2d => {
            if n_modes == 0 {
                return Err(Error::InvalidCount(n_modes));
            }
            Spectrum::new(
                square_levels(n_modes)
                    .into_iter()
                    .map(|(s, pairs)| SpectrumEntry::new(scale * s as f64 * PI * PI, pairs.len(), format!("s{s}")))
                    .collect(),
            )
        }
        SpectrumModel::User { entries } => {
            let scaled = entries
                .iter()
                .map(|e| SpectrumEntry::new(scale * e.lambda, e.multiplicity, e.label.clone()))
                .collect();
            Spectrum::new(scaled)
        }
    }
}

/// `int_a^b phi_j phi_m dx` with `phi_j = sqrt(2) sin(j pi x)`.
pub fn sine_overlap(j: usize, m: usize, a: f64, b: f64) -> f64 {
    let (jf, mf) = (j as f64, m as f64);
    let term = |x: f64| {
        let plus = (jf + mf) * PI;
        let second = (plus * x).sin() / plus;
        if j == m {
            x - second
        } else {
            let minus = (jf - mf) * PI;
            (minus * x).sin() / minus - second
        }
    };
    term(b) - term(a)
}

/// `int_a^b phi_j dx`.
pub fn sine_mean(j: usize, a: f64, b: f64) -> f64 {
    let w = j as f64 * PI;
    2f64.sqrt() * ((w * a).cos() - (w * b).cos()) / w
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "subdomain [{a}, {b}] must lie inside [0, 1]"
        )));
    }
    Ok(())
}

/// Actuators `chi_[a,b] phi_{m_i}` on the interval: coefficient `(j, i)` is
/// `int_a^b phi_j phi_{m_i}` for modes `j = 1..n_modes`.
pub fn indicator_actuators_1d(a: f64, b: f64, n_modes: usize, actuator_modes: &[usize]) -> Result<ActuatorSet> {
    check_interval(a, b)?;
    if actuator_modes.iter().any(|&m| m == 0) {
        return Err(Error::InvalidParameter("sine modes are numbered from 1".into()));
    }
    let c = DMatrix::from_fn(n_modes, actuator_modes.len(), |j, i| sine_overlap(j + 1, actuator_modes[i], a, b));
    Ok(ActuatorSet::new(
        c,
        format!("indicator on [{a}, {b}] times sine modes {actuator_modes:?}"),
    ))
}

/// Single actuator `chi_[a,b]`: coefficients `int_a^b phi_j`.
pub fn indicator_profile_1d(a: f64, b: f64, n_modes: usize) -> Result<ActuatorSet> {
    check_interval(a, b)?;
    let c = DMatrix::from_fn(n_modes, 1, |j, _| sine_mean(j + 1, a, b));
    Ok(ActuatorSet::new(c, format!("indicator on [{a}, {b}]")))
}

/// Mode pairs of the first `levels` square levels in spectrum order.
pub fn square_mode_pairs(levels: usize) -> Vec<(usize, usize)> {
    square_levels(levels).into_iter().flat_map(|(_, p)| p).collect()
}

/// Tensor-product actuators on the rectangle `[x0, x1] x [y0, y1]` for the
/// square spectrum with `levels` levels.
pub fn indicator_actuators_2d(
    x: (f64, f64),
    y: (f64, f64),
    levels: usize,
    actuator_modes: &[(usize, usize)],
) -> Result<ActuatorSet> {
    check_interval(x.0, x.1)?;
    check_interval(y.0, y.1)?;
    let pairs = square_mode_pairs(levels);
    let c = DMatrix::from_fn(pairs.len(), actuator_modes.len(), |r, i| {
        let (j, k) = pairs[r];
        let (m, n) = actuator_modes[i];
        sine_overlap(j, m, x.0, x.1) * sine_overlap(k, n, y.0, y.1)
    });
    Ok(ActuatorSet::new(
        c,
        format!("indicator on [{}, {}] x [{}, {}] times modes {actuator_modes:?}", x.0, x.1, y.0, y.1),
    ))
}
