//! TOML configuration: model description plus run parameters.
//!
//! Keys carry their units: rates are `*_per_time`, durations `*_time`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::ModelSpec;
use crate::error::{Result, SimError};
use crate::kernel::IntensitySpec;
use crate::micro::{AffineDynamics, AffineMode, MicroKind};
use crate::noise::CompoundPoissonSpec;
use crate::path::HybridState;
use crate::Mode;

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mode: Mode,
    pub position: Vec<f64>,
}

/// Affine coefficients for one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub mode: Mode,
    #[serde(flatten)]
    pub coefficients: AffineMode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Coefficients for modes without their own entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<AffineMode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeCoefficients>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroOverride {
    pub mode: Mode,
    pub micro: MicroKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda_per_time: f64,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "one")]
    pub noise_dimension: usize,
    pub initial: InitialConfig,
    /// Defaults to `jump_euler` when compound Poisson streams are configured, else `euler`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<MicroKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub micro_overrides: Vec<MicroOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compound_poisson: Vec<CompoundPoissonSpec>,
    pub intensity: IntensitySpec,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let mut modes = BTreeMap::new();
        for m in &self.dynamics.modes {
            if modes.insert(m.mode, m.coefficients.clone()).is_some() {
                return Err(SimError::config(format!(
                    "dynamics listed twice for mode {}",
                    m.mode
                )));
            }
        }
        let dynamics = AffineDynamics::new(
            self.dimension,
            self.noise_dimension,
            self.compound_poisson.len(),
            modes,
            self.dynamics.default.clone(),
        )?;
        let micro = self.micro.unwrap_or(if self.compound_poisson.is_empty() {
            MicroKind::Euler
        } else {
            MicroKind::JumpEuler
        });
        let mut micro_overrides = BTreeMap::new();
        for o in &self.micro_overrides {
            if micro_overrides.insert(o.mode, o.micro).is_some() {
                return Err(SimError::config(format!(
                    "micro-algorithm overridden twice for mode {}",
                    o.mode
                )));
            }
        }
        if let Some(bad) = self.initial.position.iter().find(|v| !v.is_finite()) {
            return Err(SimError::config(format!("initial position has non-finite entry {bad}")));
        }
        let spec = ModelSpec {
            lambda: self.lambda_per_time,
            intensity: self.intensity.clone(),
            dynamics: Arc::new(dynamics),
            micro,
            micro_overrides,
            initial: HybridState::new(self.initial.mode, self.initial.position.clone()),
            compound_poisson: self.compound_poisson.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon_time: f64,
    /// Discretisation level `n` (step `1 / n`).
    pub level: usize,
    pub seed: u64,
    /// Tape resolution; defaults to `level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<usize>,
}

impl RunSection {
    pub fn n_ref(&self) -> usize {
        self.reference_level.unwrap_or(self.level)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_time > 0.0 && self.horizon_time.is_finite()) {
            return Err(SimError::config(format!(
                "horizon_time must be positive, got {}",
                self.horizon_time
            )));
        }
        if self.level == 0 || self.n_ref() % self.level != 0 {
            return Err(SimError::config(format!(
                "level {} must be positive and divide reference_level {}",
                self.level,
                self.n_ref()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| SimError::config(e.to_string()))?;
        cfg.run.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::config(e.to_string()))
    }
}
