//! Scenario documents and their resolution into numerical inputs.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use pidectl_core::fluids::{
    indicator_actuators_1d, indicator_actuators_2d, indicator_profile_1d, jeffreys_reduce,
    model_spectrum, oldroyd_to_abstract, JeffreysParams, OldroydParams, SpectrumModel,
};
use pidectl_core::simulator::{ForcingField, ForcingTerm};
use pidectl_core::spectral::{MemoryKernel, Spectrum, SpectrumEntry};
use pidectl_core::synthesis::ActuatorSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSource {
    Model {
        model: SpectrumModel,
        #[serde(default = "one")]
        scale: f64,
        /// Number of entries (distinct levels for the square).
        modes: usize,
    },
    /// A spectrum document on disk; relative paths resolve against the config.
    File { path: PathBuf },
    Values { values: Vec<f64> },
    Entries { entries: Vec<SpectrumEntry> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub b: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluidSpec {
    Oldroyd {
        nu: f64,
        kappa: f64,
        lambda: f64,
    },
    Jeffreys {
        mu: f64,
        kappa: f64,
        lambda: f64,
        #[serde(default)]
        tau0: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActuatorSpec {
    Eigenbasis {
        #[serde(default)]
        count: Option<usize>,
    },
    Randomized {
        #[serde(default)]
        count: Option<usize>,
    },
    /// Rows are modes, columns actuators.
    Matrix { coefficients: Vec<Vec<f64>> },
    Indicator1d { interval: [f64; 2], modes: Vec<usize> },
    IndicatorProfile1d { interval: [f64; 2] },
    Indicator2d {
        x: [f64; 2],
        y: [f64; 2],
        modes: Vec<[usize; 2]>,
    },
}

impl Default for ActuatorSpec {
    fn default() -> Self {
        ActuatorSpec::Eigenbasis { count: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub f_e: Vec<f64>,
    #[serde(default)]
    pub transients: Vec<ForcingTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spectrum: SpectrumSource,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub fluid: Option<FluidSpec>,
    pub gamma: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    /// Riccati truncation `K`.
    #[serde(default)]
    pub truncation: Option<usize>,
    /// Modes kept by the simulator.
    #[serde(default)]
    pub simulation_modes: Option<usize>,
    #[serde(default)]
    pub actuators: ActuatorSpec,
    /// Null-control horizon `T`; defaults to `min(1, 20 / delta)`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Simulation length; defaults to `20 / gamma`.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    /// Initial modal data; defaults to `1 / n`.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn finite_positive(field: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(field, format!("{x} must be a positive number")))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::config("config", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        let mut s = Self::from_json(&text)?;
        if let SpectrumSource::File { path: p } = &mut s.spectrum {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Field-level checks that do not need the spectrum.
    pub fn validate(&self) -> CliResult<()> {
        match (&self.kernel, &self.fluid) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("kernel", "give either kernel or fluid, not both"))
            }
            (None, None) => return Err(CliError::config("kernel", "missing (or give fluid)")),
            (Some(k), None) => {
                if !(k.b.is_finite() && k.b >= 0.0) {
                    return Err(CliError::config("kernel.b", format!("{} must be nonnegative", k.b)));
                }
                finite_positive("kernel.delta", k.delta)?;
            }
            (None, Some(_)) => {}
        }
        finite_positive("gamma", self.gamma)?;
        if !(0.0..=0.75).contains(&self.alpha) {
            return Err(CliError::config("alpha", format!("{} outside [0, 3/4]", self.alpha)));
        }
        if let Some(h) = self.horizon {
            finite_positive("horizon", h)?;
        }
        if let Some(t) = self.t_max {
            finite_positive("t_max", t)?;
        }
        if let Some(h) = self.step {
            finite_positive("step", h)?;
        }
        if self.truncation == Some(0) {
            return Err(CliError::config("truncation", "must be at least 1"));
        }
        if self.simulation_modes == Some(0) {
            return Err(CliError::config("simulation_modes", "must be at least 1"));
        }
        if let SpectrumSource::Model { scale, modes, .. } = &self.spectrum {
            finite_positive("spectrum.scale", *scale)?;
            if *modes == 0 {
                return Err(CliError::config("spectrum.modes", "must be at least 1"));
            }
        }
        if let Some(init) = &self.initial {
            if init.iter().any(|x| !x.is_finite()) {
                return Err(CliError::config("initial", "entries must be finite"));
            }
        }
        Ok(())
    }

    /// Null-control horizon for a resolved kernel with rate `delta`.
    pub fn horizon(&self, delta: f64) -> f64 {
        self.horizon.unwrap_or((20.0 / delta).min(1.0))
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(20.0 / self.gamma)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn resolve(&self) -> CliResult<Problem> {
        let (kernel, operator_scale, fluid_forcing) = match (&self.kernel, &self.fluid) {
            (Some(k), _) => (
                MemoryKernel::new(k.b, k.delta).map_err(|e| CliError::config("kernel", e))?,
                1.0,
                None,
            ),
            (None, Some(FluidSpec::Oldroyd { nu, kappa, lambda })) => {
                let o = oldroyd_to_abstract(&OldroydParams {
                    nu: *nu,
                    kappa: *kappa,
                    lambda_relax: *lambda,
                })
                .map_err(|e| CliError::config("fluid", e))?;
                (o.kernel, o.mu, None)
            }
            (None, Some(FluidSpec::Jeffreys { mu, kappa, lambda, tau0 })) => {
                let (k, f) = jeffreys_reduce(&JeffreysParams {
                    mu_visc: *mu,
                    kappa: *kappa,
                    lambda_relax: *lambda,
                    tau0: tau0.clone(),
                })
                .map_err(|e| CliError::config("fluid", e))?;
                (k, *mu, if tau0.is_empty() { None } else { Some(f) })
            }
            (None, None) => return Err(CliError::config("kernel", "missing")),
        };
        let spectrum = match &self.spectrum {
            SpectrumSource::Model { model, scale, modes } => {
                model_spectrum(model, scale * operator_scale, *modes)
            }
            SpectrumSource::File { path } => Spectrum::load(path).and_then(|s| scaled(&s, operator_scale)),
            SpectrumSource::Values { values } => {
                Spectrum::from_eigenvalues(values).and_then(|s| scaled(&s, operator_scale))
            }
            SpectrumSource::Entries { entries } => {
                Spectrum::new(entries.clone()).and_then(|s| scaled(&s, operator_scale))
            }
        }
        .map_err(|e| CliError::config("spectrum", e))?;

        let mut forcing = self.forcing.as_ref().map(|f| ForcingField {
            f_e: f.f_e.clone(),
            transients: f.transients.clone(),
            in_range: true,
        });
        if let Some(extra) = fluid_forcing {
            let f = forcing.get_or_insert_with(|| ForcingField::zero(extra.modes()));
            let k = f.modes().max(extra.modes());
            let mut merged = f.resized(k);
            merged.transients.extend(extra.resized(k).transients);
            *f = merged;
        }
        if let Some(f) = &forcing {
            f.validate().map_err(|e| CliError::config("forcing", e))?;
        }
        Ok(Problem {
            spectrum,
            kernel,
            forcing,
        })
    }

    /// Actuator coefficients with at least `rows` rows.
    pub fn actuator_matrix(&self, rows: usize) -> CliResult<Option<ActuatorSet>> {
        let set = match &self.actuators {
            ActuatorSpec::Eigenbasis { .. } | ActuatorSpec::Randomized { .. } => return Ok(None),
            ActuatorSpec::Matrix { coefficients } => {
                let r = coefficients.len();
                let c = coefficients.first().map_or(0, Vec::len);
                if r == 0 || c == 0 || coefficients.iter().any(|row| row.len() != c) {
                    return Err(CliError::config("actuators.coefficients", "must be a nonempty rectangular matrix"));
                }
                ActuatorSet::new(DMatrix::from_fn(r, c, |i, j| coefficients[i][j]), "user coefficients")
            }
            ActuatorSpec::Indicator1d { interval, modes } => {
                indicator_actuators_1d(interval[0], interval[1], rows, modes)
                    .map_err(|e| CliError::config("actuators", e))?
            }
            ActuatorSpec::IndicatorProfile1d { interval } => indicator_profile_1d(interval[0], interval[1], rows)
                .map_err(|e| CliError::config("actuators", e))?,
            ActuatorSpec::Indicator2d { x, y, modes } => {
                let levels = match &self.spectrum {
                    SpectrumSource::Model { model: SpectrumModel::Square2d, modes, .. } => *modes,
                    _ => {
                        return Err(CliError::config(
                            "actuators",
                            "indicator_2d requires the square_2d spectrum model",
                        ))
                    }
                };
                let pairs: Vec<(usize, usize)> = modes.iter().map(|m| (m[0], m[1])).collect();
                indicator_actuators_2d((x[0], x[1]), (y[0], y[1]), levels, &pairs)
                    .map_err(|e| CliError::config("actuators", e))?
            }
        };
        Ok(Some(set))
    }

    /// Initial modal data on `k` modes.
    pub fn initial_data(&self, k: usize) -> DVector<f64> {
        match &self.initial {
            Some(v) => DVector::from_fn(k, |i, _| v.get(i).copied().unwrap_or(0.0)),
            None => DVector::from_fn(k, |i, _| 1.0 / (i + 1) as f64),
        }
    }
}

fn scaled(s: &Spectrum, factor: f64) -> pidectl_core::Result<Spectrum> {
    if factor == 1.0 {
        return Ok(s.clone());
    }
    Spectrum::new(
        s.entries()
            .iter()
            .map(|e| SpectrumEntry::new(e.lambda * factor, e.multiplicity, e.label.clone()))
            .collect(),
    )
}

/// Numerical inputs derived from a scenario.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spectrum: Spectrum,
    pub kernel: MemoryKernel,
    pub forcing: Option<ForcingField>,
}
