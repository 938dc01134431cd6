//! JSON run configuration.
//!
//! Every section is optional at parse time; each subcommand asks for the
//! sections it needs and reports a missing one as a config error.

use std::path::PathBuf;

use lakevortex::asymptotics::{CheckThresholds, DeltaSchedule, SweepConfig};
use lakevortex::elliptic::{BoundaryFlux, DEFAULT_TOLERANCE};
use lakevortex::geometry::PRESETS;
use lakevortex::kernel::KernelTestConfig;
use lakevortex::nonlinearity::VorticityFunction;
use lakevortex::variational::{AdmissibleParams, Init, SolveOptions};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lake: Option<LakeSpec>,
    #[serde(default)]
    pub flux: BoundaryFlux,
    pub nonlinearity: Option<VorticityFunction>,
    pub params: Option<AdmissibleParams>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Regime whose concentration target the `solve` diagnostics refer to.
    #[serde(default = "default_regime")]
    pub target_regime: DeltaSchedule,
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    #[serde(default)]
    pub checks: CheckThresholds,
    pub oracle: Option<OracleSpec>,
    pub hypotheses: Option<HypothesisSpec>,
    pub kernel: Option<KernelSpec>,
    pub output_dir: Option<PathBuf>,
}

fn default_regime() -> DeltaSchedule {
    DeltaSchedule::Critical
}

fn default_target_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LakeSpec {
    pub preset: String,
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct SolverSpec {
    pub linear_tolerance: f64,
    #[serde(flatten)]
    pub options: SolveOptions,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { linear_tolerance: DEFAULT_TOLERANCE, options: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TinyLake {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    /// Row-major depth per cell; unit depth when absent.
    pub depth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub levels: usize,
    pub params: AdmissibleParams,
    pub fixtures: Vec<TinyLake>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub s_max: f64,
    pub n: usize,
    /// Functions to check; the top-level nonlinearity when absent.
    pub functions: Option<Vec<VorticityFunction>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct KernelSpec {
    pub resolution: usize,
    #[serde(flatten)]
    pub test: KernelTestConfig,
    /// Centre of the shrinking patches in the correction sweep.
    #[serde(default = "default_patch_center")]
    pub patch_center: [f64; 2],
}

fn default_patch_center() -> [f64; 2] {
    [0.3, 0.2]
}

/// A config problem tied to a top-level key, so the message can point at the
/// line where that key appears.
#[derive(Debug)]
pub struct ConfigError {
    pub key: Option<&'static str>,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: &'static str, message: impl Into<String>) -> Self {
        ConfigError { key: Some(key), message: message.into() }
    }
}

pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub hash: String,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `text`; the error carries serde's line and column.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))
}

/// 1-based line of the first occurrence of `"key"`.
pub fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl RunConfig {
    /// Checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(l) = &self.lake {
            if !PRESETS.contains(&l.preset.as_str()) {
                return Err(ConfigError::new(
                    "preset",
                    format!("unknown lake preset `{}`; expected one of {}", l.preset, PRESETS.join(", ")),
                ));
            }
        }
        let s = &self.solver;
        if !(s.linear_tolerance > 0.0) {
            return Err(ConfigError::new("linear_tolerance", "linear_tolerance must be positive"));
        }
        s.options.validate().map_err(|e| ConfigError::new("solver", e.to_string()))?;
        self.flux.validate().map_err(|e| ConfigError::new("flux", e.to_string()))?;
        if let Some(vf) = &self.nonlinearity {
            vf.validate().map_err(|e| ConfigError::new("nonlinearity", e.to_string()))?;
        }
        if let Some(sw) = &self.sweep {
            sw.validate().map_err(|e| ConfigError::new("sweep", e.to_string()))?;
        }
        if !(self.target_radius > 0.0) {
            return Err(ConfigError::new("target_radius", "target_radius must be positive"));
        }
        Ok(())
    }

    pub fn lake(&self) -> Result<&LakeSpec, ConfigError> {
        self.lake.as_ref().ok_or_else(|| ConfigError { key: None, message: "missing `lake` section".into() })
    }

    pub fn nonlinearity(&self) -> Result<&VorticityFunction, ConfigError> {
        self.nonlinearity
            .as_ref()
            .ok_or_else(|| ConfigError { key: None, message: "missing `nonlinearity` section".into() })
    }
}
