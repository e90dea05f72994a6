//! Spectrum of the diffusion operator, the exponential memory kernel, the
//! per-mode characteristic roots and the partition of modes into the block
//! that needs control to decay at a prescribed rate and the stable tail.

use std::collections::HashSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance below which two eigenvalues are treated as equal.
pub const MERGE_REL_TOL: f64 = 1e-12;

/// Absolute tolerance on root distances for degeneracy detection.
pub const ROOT_COLLISION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub multiplicity: usize,
    pub label: String,
}

impl SpectrumEntry {
    pub fn new(lambda: f64, multiplicity: usize, label: impl Into<String>) -> Self {
        Self {
            lambda,
            multiplicity,
            label: label.into(),
        }
    }
}

/// One eigenfunction of the expanded (multiplicity-unrolled) spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub lambda: f64,
    pub label: String,
    pub entry: usize,
}

/// Ascending, merged eigenvalues of a positive self-adjoint operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Spectrum {
    entries: Vec<SpectrumEntry>,
}

impl Spectrum {
    /// Validates, sorts and merges the entries. Eigenvalues closer than
    /// [`MERGE_REL_TOL`] (relative) collapse into one entry whose
    /// multiplicity is the sum; the first label is kept.
    pub fn new(mut entries: Vec<SpectrumEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.lambda.is_finite() && e.lambda > 0.0) {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {} of '{}' is not a positive finite number",
                    e.lambda, e.label
                )));
            }
            if e.multiplicity == 0 {
                return Err(Error::InvalidSpectrum(format!(
                    "entry '{}' has zero multiplicity",
                    e.label
                )));
            }
        }
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let mut merged: Vec<SpectrumEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last)
                    if (e.lambda - last.lambda).abs()
                        <= MERGE_REL_TOL * e.lambda.max(last.lambda) =>
                {
                    last.multiplicity += e.multiplicity;
                }
                _ => merged.push(e),
            }
        }
        let mut seen = HashSet::new();
        for e in &merged {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::InvalidSpectrum(format!(
                    "duplicate label '{}'",
                    e.label
                )));
            }
        }
        Ok(Self { entries: merged })
    }

    /// Builds a spectrum from plain eigenvalues labelled `m1, m2, ...`.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &l)| SpectrumEntry::new(l, 1, format!("m{}", i + 1)))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of modes counted with multiplicity.
    pub fn mode_count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Multiplicity-unrolled modes in ascending order.
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::with_capacity(self.mode_count());
        for (i, e) in self.entries.iter().enumerate() {
            for k in 0..e.multiplicity {
                let label = if e.multiplicity == 1 {
                    e.label.clone()
                } else {
                    format!("{}.{}", e.label, k + 1)
                };
                out.push(Mode {
                    lambda: e.lambda,
                    label,
                    entry: i,
                });
            }
        }
        out
    }

    /// Eigenvalues of the first `k` modes.
    pub fn mode_eigenvalues(&self, k: usize) -> Vec<f64> {
        self.modes().into_iter().take(k).map(|m| m.lambda).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<SpectrumEntry> = serde_json::from_str(text)?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<SpectrumEntry>::deserialize(d)?;
        Spectrum::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Exponential memory kernel `beta(t) = b exp(-delta t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernel {
    pub b: f64,
    pub delta: f64,
}

impl Default for MemoryKernel {
    fn default() -> Self {
        Self { b: 1.0, delta: 1.0 }
    }
}

impl MemoryKernel {
    pub fn new(b: f64, delta: f64) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidKernel(format!("amplitude b = {b} must be >= 0")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidKernel(format!("decay delta = {delta} must be > 0")));
        }
        Ok(Self { b, delta })
    }

    /// Unit-amplitude kernel.
    pub fn normalized(delta: f64) -> Result<Self> {
        Self::new(1.0, delta)
    }

    pub fn eval(&self, t: f64) -> f64 {
        beta_eval(self, t)
    }
}

/// `b exp(-delta t)` for `t >= 0`.
pub fn beta_eval(kernel: &MemoryKernel, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    kernel.b * (-kernel.delta * t).exp()
}

/// Supremum `b + delta` of admissible target decay rates; the limit of the
/// slow root branch as the eigenvalue grows.
pub fn growth_bound(kernel: &MemoryKernel) -> f64 {
    kernel.b + kernel.delta
}

/// Characteristic rates of one mode: `-mu_plus`, `-mu_minus` are the roots
/// of `r^2 + (lambda + delta) r + lambda (b + delta) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalRootPair {
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    pub lambda: f64,
    pub is_real: bool,
    pub is_degenerate: bool,
}

impl ModalRootPair {
    pub fn sum(&self) -> Complex64 {
        self.mu_plus + self.mu_minus
    }

    pub fn product(&self) -> Complex64 {
        self.mu_plus * self.mu_minus
    }

    /// Distance between the two roots.
    pub fn gap(&self) -> f64 {
        (self.mu_plus - self.mu_minus).norm()
    }
}

pub fn modal_roots(lambda: f64, kernel: &MemoryKernel) -> ModalRootPair {
    let MemoryKernel { b, delta } = *kernel;
    let s = lambda + delta;
    let p = lambda * (b + delta);
    // (lambda + delta)^2 - 4 lambda (b + delta) rewritten to avoid cancellation.
    let disc = (lambda - delta).powi(2) - 4.0 * lambda * b;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let plus = 0.5 * (s + sq);
        let minus = if plus > 0.0 { p / plus } else { 0.5 * (s - sq) };
        ModalRootPair {
            mu_plus: Complex64::new(plus, 0.0),
            mu_minus: Complex64::new(minus, 0.0),
            lambda,
            is_real: true,
            is_degenerate: sq <= ROOT_COLLISION_TOL,
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        ModalRootPair {
            mu_plus: Complex64::new(0.5 * s, im),
            mu_minus: Complex64::new(0.5 * s, -im),
            lambda,
            is_real: false,
            is_degenerate: 2.0 * im <= ROOT_COLLISION_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degeneracy {
    /// `mu_plus == mu_minus` for one mode.
    DoubleRoot { label: String, lambda: f64 },
    /// `mu_plus` of one entry coincides with `mu_minus` of another.
    CrossBranch {
        plus_label: String,
        minus_label: String,
        plus_lambda: f64,
        minus_lambda: f64,
    },
}

/// Lists violations of the standing assumptions: no double roots and no
/// cross-branch collisions `mu_j^+ = mu_m^-` for distinct eigenvalues.
pub fn check_degeneracy(spectrum: &Spectrum, kernel: &MemoryKernel) -> Vec<Degeneracy> {
    let roots: Vec<ModalRootPair> = spectrum
        .entries()
        .iter()
        .map(|e| modal_roots(e.lambda, kernel))
        .collect();
    let mut out = Vec::new();
    for (e, r) in spectrum.entries().iter().zip(&roots) {
        if r.is_degenerate {
            out.push(Degeneracy::DoubleRoot {
                label: e.label.clone(),
                lambda: e.lambda,
            });
        }
    }
    for (j, rj) in roots.iter().enumerate() {
        for (m, rm) in roots.iter().enumerate() {
            if j != m && (rj.mu_plus - rm.mu_minus).norm() <= ROOT_COLLISION_TOL {
                let ej = &spectrum.entries()[j];
                let em = &spectrum.entries()[m];
                out.push(Degeneracy::CrossBranch {
                    plus_label: ej.label.clone(),
                    minus_label: em.label.clone(),
                    plus_lambda: ej.lambda,
                    minus_lambda: em.lambda,
                });
            }
        }
    }
    out
}

/// A run of equal eigenvalues inside the unstable block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeGroup {
    pub lambda: f64,
    pub multiplicity: usize,
    pub label: String,
    /// Index of the group's first mode in the expanded ordering.
    pub first_mode: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnstablePartition {
    pub gamma: f64,
    pub n1: usize,
    pub n2: usize,
    pub n_total: usize,
    pub groups: Vec<ModeGroup>,
    pub m_max: usize,
    pub unstable_labels: Vec<String>,
    /// Eigenvalues of the `n_total` unstable modes (expanded).
    pub unstable_lambdas: Vec<f64>,
    /// `min Re mu - gamma` over everything outside the block, including the
    /// asymptotic bound `b + delta` for modes beyond the supplied spectrum.
    pub stable_margin: f64,
}

impl UnstablePartition {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Modes that need no control: the block is empty.
    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }
}

/// Splits the spectrum at the prescribed decay rate `gamma`:
/// `N1 = sup{j : Re mu_j^+ <= gamma}`, `N2 = sup{j : Re mu_j^- <= gamma}`,
/// `N = max(N1, N2)` with indices counted over modes.
pub fn partition_spectrum(
    spectrum: &Spectrum,
    kernel: &MemoryKernel,
    gamma: f64,
) -> Result<UnstablePartition> {
    let omega0 = growth_bound(kernel);
    if !(gamma > 0.0 && gamma < omega0) {
        return Err(Error::GammaOutOfRange { gamma, omega0 });
    }
    let report = check_degeneracy(spectrum, kernel);
    if !report.is_empty() {
        return Err(Error::DegenerateSpectrum(format!("{report:?}")));
    }

    let mut n1 = 0;
    let mut n2 = 0;
    let mut count = 0;
    let mut re_parts = Vec::with_capacity(spectrum.len());
    for e in spectrum.entries() {
        let r = modal_roots(e.lambda, kernel);
        count += e.multiplicity;
        if r.mu_plus.re <= gamma {
            n1 = count;
        }
        if r.mu_minus.re <= gamma {
            n2 = count;
        }
        re_parts.push((count, r.mu_plus.re.min(r.mu_minus.re)));
    }
    let n_total = n1.max(n2);

    let mut groups = Vec::new();
    let mut first = 0;
    for e in spectrum.entries() {
        if first >= n_total {
            break;
        }
        groups.push(ModeGroup {
            lambda: e.lambda,
            multiplicity: e.multiplicity,
            label: e.label.clone(),
            first_mode: first,
        });
        first += e.multiplicity;
    }
    let m_max = groups.iter().map(|g| g.multiplicity).max().unwrap_or(0);

    let mut stable_margin = omega0 - gamma;
    for (end, re) in &re_parts {
        if *end > n_total {
            stable_margin = stable_margin.min(re - gamma);
        }
    }
    let modes = spectrum.modes();
    Ok(UnstablePartition {
        gamma,
        n1,
        n2,
        n_total,
        groups,
        m_max,
        unstable_labels: modes.iter().take(n_total).map(|m| m.label.clone()).collect(),
        unstable_lambdas: modes.iter().take(n_total).map(|m| m.lambda).collect(),
        stable_margin,
    })
}
