//! Run configuration: a TOML file, an optional preset, and flag overrides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NumericOptions};
use crate::presets;
use crate::ratefn::{parse_constant, parse_rate, DensityDependence};

/// A number given either literally or as a constant expression such as `pi/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn value(&self, path: &str) -> Result<f64> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Text(s) => parse_constant(s).map_err(|e| config_err(path, e)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a_dagger: Option<Scalar>,
    pub r0d: Option<Scalar>,
    pub alpha: Option<Scalar>,
    pub beta: Option<String>,
    pub mu: Option<String>,
    pub r: Option<String>,
    pub q: Option<String>,
    pub k: Option<String>,
    pub phi: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaSection {
    /// Sweep `α` over `[alpha_lo, alpha_hi]` with `step` instead of one value.
    pub alpha_lo: Option<f64>,
    pub alpha_hi: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub equilibrium: Selector,
    /// Endemic states are counted from the lowest `W*`.
    pub index: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { equilibrium: Selector::Endemic, index: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    pub alpha_lo: Option<f64>,
    pub alpha_hi: Option<f64>,
    pub step: f64,
}

impl Default for BranchSection {
    fn default() -> Self {
        BranchSection { alpha_lo: None, alpha_hi: None, step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// Perturbed endemic state number `index`.
    Endemic,
    /// Disease-free state with an infective seed.
    DiseaseFree,
    /// `s0`, `i0` expressions in `a`.
    Expressions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub start: Start,
    pub index: usize,
    pub perturbation: f64,
    pub s0: Option<String>,
    pub i0: Option<String>,
    /// Age cells on `[0, a†]`; the step is `a†/cells`.
    pub cells: usize,
    pub t_end: f64,
    /// Keep every n-th trace row in the output.
    pub record_every: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            start: Start::Endemic,
            index: 0,
            perturbation: crate::simulate::PERTURBATION,
            s0: None,
            i0: None,
            cells: crate::simulate::DEFAULT_CELLS,
            t_end: 100.0,
            record_every: 1,
        }
    }
}

/// The file as written, before presets and flags are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub model: ModelSection,
    pub numerics: Option<NumericOptions>,
    #[serde(default)]
    pub equilibria: EquilibriaSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub branch: BranchSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub equilibria: EquilibriaSection,
    pub spectrum: SpectrumSection,
    pub branch: BranchSection,
    pub simulate: SimulateSection,
}

fn config_err(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Config { path: path.to_string(), message: e.to_string() }
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "config".into());
            config_err(&path, e.message())
        })
    }

    /// Applies the preset (if any), then every explicit `[model]` key.
    pub fn resolve(&self, preset_flag: Option<&str>) -> Result<RunConfig> {
        let preset = preset_flag.or(self.preset.as_deref());
        let m = &self.model;
        let spec = match preset {
            Some(name) => {
                let mut s = presets::by_name(name)?;
                if let Some(v) = &m.a_dagger {
                    s.a_dagger = v.value("model.a_dagger")?;
                }
                if let Some(v) = &m.r0d {
                    s.r0d = v.value("model.r0d")?;
                }
                if let Some(v) = &m.alpha {
                    s.alpha = v.value("model.alpha")?;
                }
                for (key, src, slot) in [
                    ("beta", &m.beta, &mut s.beta),
                    ("mu", &m.mu, &mut s.mu),
                    ("r", &m.r, &mut s.r),
                    ("q", &m.q, &mut s.q),
                    ("k", &m.k, &mut s.k),
                ] {
                    if let Some(text) = src {
                        *slot = parse_rate(text).map_err(|e| config_err(&format!("model.{}", key), e))?;
                    }
                }
                if let Some(text) = &m.phi {
                    s.phi = DensityDependence::parse(text).map_err(|e| config_err("model.phi", e))?;
                }
                s
            }
            None => {
                fn need<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T> {
                    v.as_ref().ok_or_else(|| config_err(&format!("model.{}", key), "required when no preset is given"))
                }
                let rate = |v: &Option<String>, key: &str| {
                    parse_rate(need(v, key)?).map_err(|e| config_err(&format!("model.{}", key), e))
                };
                ModelSpec {
                    a_dagger: need(&m.a_dagger, "a_dagger")?.value("model.a_dagger")?,
                    r0d: need(&m.r0d, "r0d")?.value("model.r0d")?,
                    alpha: need(&m.alpha, "alpha")?.value("model.alpha")?,
                    beta: rate(&m.beta, "beta")?,
                    mu: rate(&m.mu, "mu")?,
                    r: rate(&m.r, "r")?,
                    q: rate(&m.q, "q")?,
                    k: rate(&m.k, "k")?,
                    phi: DensityDependence::parse(need(&m.phi, "phi")?).map_err(|e| config_err("model.phi", e))?,
                    numerics: NumericOptions::default(),
                }
            }
        };
        let mut spec = spec;
        if let Some(n) = &self.numerics {
            spec.numerics = n.clone();
        }
        Ok(RunConfig {
            spec,
            equilibria: self.equilibria.clone(),
            spectrum: self.spectrum.clone(),
            branch: self.branch.clone(),
            simulate: self.simulate.clone(),
        })
    }
}

impl RunConfig {
    /// The effective configuration with every model key spelled out, so that
    /// it reloads to the same run without a preset.
    pub fn to_raw(&self) -> RawConfig {
        let s = &self.spec;
        RawConfig {
            preset: None,
            model: ModelSection {
                a_dagger: Some(Scalar::Number(s.a_dagger)),
                r0d: Some(Scalar::Number(s.r0d)),
                alpha: Some(Scalar::Number(s.alpha)),
                beta: Some(s.beta.source().to_string()),
                mu: Some(s.mu.source().to_string()),
                r: Some(s.r.source().to_string()),
                q: Some(s.q.source().to_string()),
                k: Some(s.k.source().to_string()),
                phi: Some(s.phi.expr().source().to_string()),
            },
            numerics: Some(s.numerics.clone()),
            equilibria: self.equilibria.clone(),
            spectrum: self.spectrum.clone(),
            branch: self.branch.clone(),
            simulate: self.simulate.clone(),
        }
    }

    pub fn dump(&self) -> Result<String> {
        toml::to_string(&self.to_raw()).map_err(|e| Error::Io(e.to_string()))
    }
}
