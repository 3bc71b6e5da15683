use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cavsim_core::sim::{ArrivalModel, FuelModel, RunOptions, SimConfig};
use cavsim_core::types::{CostWeights, IntersectionConfig};

use crate::error::{CliError, CliResult};

/// Overrides `output.dir` when set.
pub const OUTPUT_DIR_ENV: &str = "CAVSIM_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Trajectory sampling step (s).
    pub sample_step: f64,
    /// Per-vehicle sample table; coefficients are always written.
    pub samples: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), sample_step: 0.01, samples: true }
    }
}

/// Everything a run reads from its configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub intersection: IntersectionConfig,
    /// Crossing times from the curve radii instead of `intersection.turn_times`.
    /// TOML has no null, so this is the only way to clear the table.
    pub geometric_turn_times: bool,
    pub weights: CostWeights,
    pub arrivals: ArrivalModel,
    pub fuel: Option<FuelModel>,
    pub run: RunOptions,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.geometric_turn_times {
            cfg.intersection.turn_times = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        let mut c = self.clone();
        c.geometric_turn_times |= c.intersection.turn_times.is_none();
        toml::to_string(&c).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sim().validate()?;
        if !(self.output.sample_step > 0.0 && self.output.sample_step.is_finite()) {
            return Err(CliError::Config("output.sample_step must be positive".into()));
        }
        Ok(())
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            intersection: self.intersection.clone(),
            weights: self.weights,
            arrivals: self.arrivals.clone(),
            fuel: self.fuel,
            run: self.run.clone(),
        }
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output_dir(&self.output.dir)
    }
}

pub fn resolve_output_dir(default: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => default.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default_and_custom() {
        let mut c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
        c.fuel = Some(FuelModel { cruise: [0.1, 0.02, 0.001, 1e-5], accel: [0.5, 0.01, 1e-4] });
        c.arrivals.max_vehicles = Some(40);
        c.arrivals.pooled = false;
        c.weights.beta = 0.75;
        c.output.dir = PathBuf::from("/tmp/x");
        c.intersection.turn_times = None;
        c.geometric_turn_times = true;
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = RunConfig::parse("[weights]\nbeta = 0.5\ngama = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, CliError::Config(_)));
        assert!(msg.contains("gama") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = RunConfig::parse("[weights]\nw = 0.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
