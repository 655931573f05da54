//! Run configuration: a structured TOML file with command-line overrides,
//! plus the reproducibility manifest written beside every run's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Family of the (first) map: "quadratic" or "cubic".
    pub family: String,
    /// Perturbation strength for the cubic family.
    pub epsilon: f64,
    /// Working precision in bits.
    pub precision: u32,
    /// Combinatorial depth (levels / Fibonacci prefix length).
    pub depth: usize,
    /// Start level m for puzzle-piece runs.
    pub start_level: usize,
    /// Sampling budget (boundary points, Julia points).
    pub budget: usize,
    /// RNG seed for inverse iteration.
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: "quadratic".into(),
            epsilon: 0.01,
            precision: 128,
            depth: 12,
            start_level: 4,
            budget: 20_000,
            seed: 42,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(CliError::Io)?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("bad config file: {}", e)))
            }
        }
    }

    pub fn family(&self) -> Result<fibrenorm::Family, CliError> {
        match self.family.as_str() {
            "quadratic" => Ok(fibrenorm::Family::Quadratic),
            "cubic" => Ok(fibrenorm::Family::CubicPerturbed {
                epsilon: self.epsilon,
            }),
            other => Err(CliError::Usage(format!(
                "unknown family '{}' (expected 'quadratic' or 'cubic')",
                other
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.precision < 53 {
            return Err(CliError::Usage("precision must be at least 53 bits".into()));
        }
        if self.depth == 0 || self.budget == 0 || self.start_level == 0 {
            return Err(CliError::Usage(
                "depth, budget and start-level must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_puzzle(&self) -> Result<(), CliError> {
        self.validate()?;
        if self.depth < self.start_level + 2 {
            return Err(CliError::Usage(
                "puzzle runs need depth >= start-level + 2".into(),
            ));
        }
        Ok(())
    }
}

/// Reproducibility manifest written beside the outputs. Timings are logged
/// to stderr instead so that re-runs stay byte-identical.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
}

pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<(), CliError> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    crate::output::write_atomic(&dir.join("manifest.json"), format!("{}\n", body).as_bytes())
}
