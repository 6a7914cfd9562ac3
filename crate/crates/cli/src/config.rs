//! The configuration schema, its defaults, file loading and dotted-path
//! overrides.

use std::path::{Path, PathBuf};

use nlslab::dynamics::IntegratorControls;
use nlslab::experiment::ExperimentConfig;
use nlslab::groundstate::PetviashviliOptions;
use nlslab::nonlinearity::SampleRange;
use nlslab::rescale::LambdaRange;
use nlslab::variational::{FamilySpec, ProfileSpec};
use nlslab::{GridSpec, NonlinearityModel, NonlinearitySpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Every setting of every subcommand. An empty config file yields the
/// defaults below.
///
/// | key | default |
/// |---|---|
/// | `model` | pure power `p = 7` |
/// | `dim`, `omega` | `1`, `1.0` |
/// | `grid` | `N = 1`, `L = 20`, `M = 4096` |
/// | `lambda_range` | `0.5 ..= 2.0`, 400 log-spaced points |
/// | `scan_seed`, `evolve.initial` | the ground state |
/// | `evolve.controls` | integrator defaults with `t_max = 1` |
/// | `instability` | `λ = 1.05`, `φ` certified on `L = 20, M = 4096`, evolved up to `M = 2^20` with spectral refinement, `t_max = 5` |
/// | `stability_contrast` | `p = 3` expected, `L = 20, M = 4096`, `t_max = 50`, leak bound `1e-3` |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub model: NonlinearitySpec,
    pub dim: usize,
    pub omega: f64,
    pub grid: GridSpec,
    pub petviashvili: PetviashviliOptions,
    pub lambda_range: LambdaRange,
    pub scan_seed: ProfileSpec,
    pub family: FamilySpec,
    pub sample_range: SampleRange,
    pub evolve: EvolveSettings,
    pub instability: RunSettings,
    pub stability_contrast: RunSettings,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSettings {
    pub initial: ProfileSpec,
    pub controls: IntegratorControls,
}

/// The experiment settings that are not shared with other subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub lambda: f64,
    pub certification_grid: GridSpec,
    pub grid: GridSpec,
    pub controls: IntegratorControls,
    pub chord_stride: usize,
    /// Further `λ` values; a non-empty list turns the run into a sweep.
    pub sweep: Vec<f64>,
}

impl RunSettings {
    fn from_experiment(e: ExperimentConfig) -> Self {
        Self {
            lambda: e.lambda,
            certification_grid: e.certification_grid,
            grid: e.grid,
            controls: e.controls,
            chord_stride: e.chord_stride,
            sweep: Vec::new(),
        }
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        Self::from_experiment(ExperimentConfig::default())
    }
}

fn ground_state_profile() -> ProfileSpec {
    ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.0 }
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self { initial: ground_state_profile(), controls: IntegratorControls { t_max: 1.0, ..IntegratorControls::default() } }
    }
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            model: NonlinearitySpec::pure_power(7.0),
            dim: 1,
            omega: 1.0,
            grid: GridSpec::one_d(20.0, 4096),
            petviashvili: PetviashviliOptions::default(),
            lambda_range: LambdaRange::default(),
            scan_seed: ground_state_profile(),
            family: FamilySpec::default(),
            sample_range: SampleRange::default(),
            evolve: EvolveSettings::default(),
            instability: RunSettings::default(),
            stability_contrast: RunSettings::from_experiment(ExperimentConfig::contrast()),
            output_dir: None,
        }
    }
}

/// A configuration problem, reported with exit code 64.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl LabConfig {
    /// Defaults, then the file (if any), then the overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(Self::default()).expect("defaults serialize");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("config {} is not valid JSON: {e}", path.display())))?;
            if !user.is_object() {
                return Err(ConfigError("config must be a JSON object".into()));
            }
            merge(&mut value, user);
        }
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let config: Self = serde_path_to_error::deserialize(value)
            .map_err(|e| ConfigError(format!("invalid config at `{}`: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let at = |key: &str, e: nlslab::Error| ConfigError(format!("invalid config at `{key}`: {e}"));
        self.model().map_err(|e| at("model", e))?;
        let grids = [
            ("grid", self.grid),
            ("instability.certification_grid", self.instability.certification_grid),
            ("instability.grid", self.instability.grid),
            ("stability_contrast.certification_grid", self.stability_contrast.certification_grid),
            ("stability_contrast.grid", self.stability_contrast.grid),
        ];
        for (key, grid) in grids {
            grid.validate().map_err(|e| at(key, e))?;
        }
        let controls = [
            ("evolve.controls", self.evolve.controls),
            ("instability.controls", self.instability.controls),
            ("stability_contrast.controls", self.stability_contrast.controls),
        ];
        for (key, c) in controls {
            c.validate().map_err(|e| at(key, e))?;
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(ConfigError(format!("invalid config at `omega`: must be positive, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn model(&self) -> nlslab::Result<NonlinearityModel> {
        NonlinearityModel::new(self.model.clone(), self.dim)
    }

    pub fn experiment(&self, run: &RunSettings) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model.clone(),
            dim: self.dim,
            omega: self.omega,
            lambda: run.lambda,
            certification_grid: run.certification_grid,
            grid: run.grid,
            controls: run.controls,
            family: self.family.clone(),
            chord_stride: run.chord_stride,
            output_dir: self.output_dir.clone(),
        }
    }
}

/// Recursive object merge; a user object carrying a `kind` tag replaces the
/// default wholesale, since its variant may have different fields.
fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, user) => *slot = user,
    }
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a string.
/// The path must name an existing key.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override `{spec}` is not of the form key=value")))?;
    let mut slot = &mut *root;
    for key in path.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| ConfigError(format!("override key `{path}` does not exist (at `{key}`)")))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}
