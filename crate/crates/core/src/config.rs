//! JSON run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuation_solver::ContinuationOptions;
use crate::curvature_operator::{HomotopyConfig, PsiSpec};
use crate::geometry::{BaseGrid, WarpKind, WarpProfile};
use crate::inequality_lab::ConjectureInstance;

pub const SCHEMA: &str = "warpcurv/run-config/v1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported config schema `{found}` (expected `{SCHEMA}`)")]
    Schema { found: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_schema() -> String {
    SCHEMA.into()
}
fn default_true() -> bool {
    true
}
fn default_points() -> usize {
    32
}
fn default_annulus() -> (f64, f64) {
    (1.0, 3.0)
}
fn default_psi() -> PsiSpec {
    PsiSpec::RadialBeta { slope: 1.0 }
}
fn default_slope() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Manufactured solution `r* = base + amplitude · Π sin u_i`. The Newton
/// start is `r* + perturbation · (base − r*)`, so `1` starts from the
/// constant `base` and `0` starts at `r*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsConfig {
    pub base: f64,
    pub amplitude: f64,
    pub perturbation: f64,
    /// Max-norm recovery error above which `mms` exits with a violation.
    pub tolerance: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            base: 2.0,
            amplitude: 0.3,
            perturbation: 1.0,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub samples: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { samples: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConjectureConfig {
    #[serde(rename = "K")]
    pub big_k: f64,
    #[serde(rename = "B")]
    pub kappa1_min: f64,
    #[serde(rename = "N0")]
    pub sigma_min: f64,
    #[serde(rename = "N1")]
    pub sigma_max: f64,
    pub budget: usize,
}

impl Default for ConjectureConfig {
    fn default() -> Self {
        Self {
            big_k: 5.0,
            kappa1_min: 10.0,
            sigma_min: 1.0,
            sigma_max: 10.0,
            budget: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub points: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: vec![32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_true")]
    pub enforce_n_lt_2k: bool,
    #[serde(default = "default_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub warp: WarpKind,
    #[serde(default = "default_annulus")]
    pub annulus: (f64, f64),
    #[serde(default = "default_psi")]
    pub psi: PsiSpec,
    #[serde(default = "default_slope")]
    pub phi_slope: f64,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads, `0` for one per core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mms: MmsConfig,
    #[serde(default)]
    pub lemmas: LemmaConfig,
    #[serde(default)]
    pub conjecture: ConjectureConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Field dump read by `audit`.
    #[serde(default)]
    pub audit_field: Option<PathBuf>,
}

impl RunConfig {
    /// A configuration with every optional key at its default.
    pub fn new(n: usize, k: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "n": n, "k": k })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA {
            return Err(ConfigError::Schema { found: cfg.schema });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks dimensions and, when enabled, the standing `n < 2k`.
    pub fn validate_dims(&self) -> Result<(), ConfigError> {
        let (n, k) = (self.n, self.k);
        if !(1 <= k && k <= n) {
            return Err(ConfigError::Invalid(format!("need 1 <= k <= n, got n={n}, k={k}")));
        }
        if self.enforce_n_lt_2k && n >= 2 * k {
            return Err(ConfigError::Invalid(format!(
                "n < 2k is required (set enforce_n_lt_2k = false to override), got n={n}, k={k}"
            )));
        }
        Ok(())
    }

    /// Everything the PDE commands need: dimensions, grid, warp profile on
    /// the annulus, ψ and φ parameters.
    pub fn validate_geometry(&self) -> Result<(), ConfigError> {
        self.validate_dims()?;
        self.grid()?;
        self.profile()?;
        self.homotopy(0.0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.psi.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let c = &self.continuation;
        if !(c.dt_min > 0.0 && c.dt_min <= c.dt0 && c.dt0 <= c.dt_max && c.grow >= 1.0) {
            return Err(ConfigError::Invalid(
                "continuation needs 0 < dt_min <= dt0 <= dt_max and grow >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<BaseGrid, ConfigError> {
        self.grid_with(self.grid_points)
    }

    pub fn grid_with(&self, points: usize) -> Result<BaseGrid, ConfigError> {
        BaseGrid::new(self.n, points).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn profile(&self) -> Result<WarpProfile, ConfigError> {
        WarpProfile::new(self.warp.clone(), self.annulus).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn homotopy(&self, t: f64) -> HomotopyConfig {
        HomotopyConfig {
            t,
            phi_slope: self.phi_slope,
            annulus: self.annulus,
            n: self.n,
            k: self.k,
        }
    }

    pub fn conjecture_instance(&self) -> ConjectureInstance {
        ConjectureInstance {
            n: self.n,
            k: self.k,
            big_k: self.conjecture.big_k,
            kappa1_min: self.conjecture.kappa1_min,
            sigma_min: self.conjecture.sigma_min,
            sigma_max: self.conjecture.sigma_max,
        }
    }
}
