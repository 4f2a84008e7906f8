//! Workbench configuration: one JSON document plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use tdcr_core::control::{ClosedLoop, ControllerConfig, GainSet, SlackStrategy};
use tdcr_core::evaluation::Trajectory;
use tdcr_core::kinematics::RobotGeometry;
use tdcr_core::learning::TrainConfig;
use tdcr_core::plant::{Plant, PlantParams};

use crate::BenchError;

/// Pretension of the global strategy in the default comparison set (N).
pub const DEFAULT_GLOBAL_PRETENSION: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkbenchConfig {
    pub geometry: RobotGeometry,
    pub plant: PlantParams,
    /// MTJ thresholds, slack strategy, derivative filter and inner loop.
    pub controller: ControllerConfig,
    /// Gains of the fixed-gain baseline; the middle of the training ranges
    /// when absent.
    pub fixed_gains: Option<GainSet>,
    /// Strategies compared by `tension-strategies`.
    pub strategies: Vec<SlackStrategy>,
    /// Training hyperparameters. Its `seed` is replaced by the top-level one.
    pub train: TrainConfig,
    pub trajectory: Trajectory,
    /// Simulated seconds per tracking run; one trajectory period when absent.
    pub eval_duration: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        Self {
            geometry: RobotGeometry::default(),
            plant: PlantParams::default(),
            controller: ControllerConfig::default(),
            fixed_gains: None,
            strategies: vec![
                SlackStrategy::PerSegmentSymmetric,
                SlackStrategy::AllSegmentsSymmetric,
                SlackStrategy::GlobalPretension { pretension: DEFAULT_GLOBAL_PRETENSION },
            ],
            train: TrainConfig::default(),
            trajectory: Trajectory::Circle,
            eval_duration: None,
            output_dir: PathBuf::from("runs"),
            seed: 0,
        }
    }
}

impl WorkbenchConfig {
    /// Reads `path` (or starts from the defaults), applies `key.path=value`
    /// overrides and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, BenchError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(Self::default()).expect("default config serializes"),
        };
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: Self = serde_json::from_value(value).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |m: String| Err(BenchError::Config(m));
        if let Err(e) = self.geometry.validate() {
            return err(e.to_string());
        }
        if let Err(e) = self.plant.validate() {
            return err(e.to_string());
        }
        if let Err(e) = self.closed_loop() {
            return Err(e);
        }
        if self.strategies.is_empty() {
            return err("at least one slack strategy is required".into());
        }
        if let Some(s) = self.strategies.iter().find(|s| !s.is_valid()) {
            return err(format!("invalid slack strategy {}", s.name()));
        }
        if let Some(g) = &self.fixed_gains {
            if !g.is_valid() {
                return err("fixed gains must be finite and non-negative".into());
            }
        }
        if let Some(d) = self.eval_duration {
            if !(d > 0.0) || !d.is_finite() {
                return err(format!("evaluation duration must be positive, got {d}"));
            }
        }
        if let Err(e) = self.train_config().validate() {
            return err(format!("train: {e}"));
        }
        Ok(())
    }

    pub fn closed_loop(&self) -> Result<ClosedLoop, BenchError> {
        let plant =
            Plant::new(self.geometry.clone(), self.plant.clone()).map_err(|e| BenchError::Config(e.to_string()))?;
        ClosedLoop::new(plant, self.controller.clone()).map_err(BenchError::Config)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn baseline_gains(&self) -> GainSet {
        self.fixed_gains.unwrap_or_else(|| self.train.gain_ranges.median())
    }

    pub fn eval_duration_for(&self, trajectory: &Trajectory) -> f64 {
        self.eval_duration.unwrap_or_else(|| trajectory.period())
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded. The output
    /// directory does not affect results and is left out.
    pub fn hash(&self) -> String {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

/// Sets one `a.b.c=value` entry. The value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(root: &mut Value, entry: &str) -> Result<(), BenchError> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| BenchError::Config(format!("override `{entry}` is not of the form key.path=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(BenchError::Config(format!("override `{entry}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("just made an object");
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("keys is non-empty")
}
