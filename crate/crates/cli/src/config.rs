//! Run configuration: a single JSON file whose keys mirror the model
//! parameter symbols, plus solver and output settings. Every field has a
//! default, so an absent or empty config reproduces the reference scenario
//! end to end.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use structured_harvest::ModelParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_cells: usize,
    pub cfl_safety: f64,
    pub initial_condition: InitialCondition,
    pub sweep: SweepSpec,
    pub replacement: ReplacementSpec,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            n_cells: 400,
            cfl_safety: 0.8,
            initial_condition: InitialCondition::NoHarvestSteady,
            sweep: SweepSpec::default(),
            replacement: ReplacementSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Initial density for forward runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    /// Stationary state of the discrete no-harvest operator (default).
    NoHarvestSteady,
    /// Empty water: zero density everywhere.
    Zero,
    /// Cell-averaged densities from a `l,x` CSV file.
    CustomFile(PathBuf),
}

/// Candidate-threshold grid for the sweep; bounds default to the full size
/// range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub spacing: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            min: None,
            max: None,
            spacing: 1.0,
        }
    }
}

/// Sampling of the replacement-index curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplacementSpec {
    /// Upper end of the sampled crowding range; defaults to twice the
    /// critical level (or twice the stationary level when no crossing
    /// exists).
    pub e_max: Option<f64>,
    pub samples: usize,
}

impl Default for ReplacementSpec {
    fn default() -> Self {
        ReplacementSpec {
            e_max: None,
            samples: 101,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}
