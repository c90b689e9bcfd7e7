//! Experiment configuration.
//!
//! Values are resolved in three layers: built-in defaults, then the JSON
//! file given with `--config` (deep-merged, so a file only needs the keys it
//! changes), then command-line flags (`--set`, `--seed`, `--out`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use fedhdc::convergence::{ConvergenceModel, FitPoint};
use fedhdc::datasets::PartitionScheme;
use fedhdc::hdc::Similarity;
use fedhdc::optimizer::SolverConfig;
use fedhdc::system_model::{ScenarioConfig, SystemConfig};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed: scenario drop and, unless `train.seeds` is set, training.
    pub seed: u64,
    pub out: PathBuf,
    pub system: SystemConfig,
    pub scenario: ScenarioSection,
    pub model: ConvergenceModel,
    pub solver: SolverConfig,
    pub train: TrainSection,
    pub fit: FitSection,
    pub optimize: OptimizeSection,
    pub sweep: SweepSection,
    pub groups: GroupsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Scenario JSON written by `gen-scenario`; when set, the generator is
    /// ignored and the file's system block replaces `system`.
    pub path: Option<PathBuf>,
    pub generator: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSection {
    /// Directory holding the four standard MNIST IDX files.
    Mnist { dir: PathBuf },
    /// Template images plus pixel noise; the first `per_class` samples of
    /// every class train, the next `test_per_class` test.
    Synthetic {
        seed: u64,
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        rows: usize,
        cols: usize,
        noise: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: DatasetSection,
    pub users: usize,
    pub rounds: usize,
    pub target_accuracy: Option<f64>,
    /// `null` disables noise.
    pub epsilon: Option<f64>,
    pub delta: f64,
    /// Clipping bound; `null` means `sqrt(d)`.
    pub kappa: Option<f64>,
    /// One run per dimension and seed.
    pub dims: Vec<usize>,
    pub levels: usize,
    pub encoder_seed: u64,
    pub partition: PartitionScheme,
    pub eta: f64,
    pub similarity: Similarity,
    /// Overrides `[seed]` when set.
    pub seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub points: Vec<FitPoint>,
    /// CSV with `d` and `J` columns (e.g. `points.csv` from `train`);
    /// appended to `points`.
    pub points_path: Option<PathBuf>,
    /// Samples of the fitted curve in the plot CSV.
    pub curve_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Proposed,
    FixedD,
    FixedP,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Proposed => "proposed",
            Baseline::FixedD => "fixed_d",
            Baseline::FixedP => "fixed_p",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub scheme: Baseline,
    /// Dimension pinned by `fixed_d`.
    pub fixed_d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Dimension,
    Bandwidth,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    /// Axis values (dimension, Hz or W); `null` picks a default range.
    pub values: Option<Vec<f64>>,
    pub baselines: Vec<Baseline>,
    pub fixed_d: f64,
}

impl SweepSection {
    pub fn axis_values(&self, solver: &SolverConfig) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match self.axis {
            Axis::Dimension => solver.d_grid.clone(),
            Axis::Bandwidth => [0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0].iter().map(|m| m * 1e6).collect(),
            Axis::Power => [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
                .iter()
                .map(|dbm: &f64| 1e-3 * 10f64.powf(dbm / 10.0))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSection {
    /// `allocation.json` from `optimize`; defaults to the one in `out`.
    pub allocation: Option<PathBuf>,
    pub buckets: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: PathBuf::from("out"),
            system: SystemConfig::default(),
            scenario: ScenarioSection { path: None, generator: ScenarioConfig::default() },
            model: ConvergenceModel::REFERENCE,
            solver: SolverConfig::default(),
            train: TrainSection {
                dataset: DatasetSection::Mnist { dir: PathBuf::from("data/mnist") },
                users: 50,
                rounds: 20,
                target_accuracy: None,
                epsilon: Some(20.0),
                delta: 1e-5,
                kappa: None,
                dims: vec![10_000],
                levels: 16,
                encoder_seed: 0,
                partition: PartitionScheme::Iid,
                eta: 1.0,
                similarity: Similarity::Cosine,
                seeds: None,
            },
            fit: FitSection { points: Vec::new(), points_path: None, curve_points: 71 },
            optimize: OptimizeSection { scheme: Baseline::Proposed, fixed_d: 8000.0 },
            sweep: SweepSection {
                axis: Axis::Bandwidth,
                values: None,
                baselines: vec![Baseline::Proposed, Baseline::FixedD, Baseline::FixedP],
                fixed_d: 8000.0,
            },
            groups: GroupsSection { allocation: None, buckets: 5 },
        }
    }
}

/// Flag-level overrides, applied last.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
}

pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut root = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let layer: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut root, layer);
    }
    for kv in &flags.set {
        let (key, raw) =
            kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        set_path(&mut root, key, parse_scalar(raw))?;
    }
    if let Some(seed) = flags.seed {
        root["seed"] = seed.into();
    }
    if let Some(out) = &flags.out {
        root["out"] = Value::String(out.to_string_lossy().into_owned());
    }
    let cfg: ExperimentConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.train.dims.is_empty() {
            return bad("train.dims must not be empty");
        }
        if self.train.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return bad("train.seeds must not be empty");
        }
        if self.groups.buckets == 0 {
            return bad("groups.buckets must be >= 1");
        }
        if self.fit.curve_points < 2 {
            return bad("fit.curve_points must be >= 2");
        }
        if self.sweep.baselines.is_empty() {
            return bad("sweep.baselines must not be empty");
        }
        self.system.validate().map_err(CliError::from_core)?;
        self.solver.validate().map_err(CliError::from_core)?;
        self.model.validate().map_err(CliError::from_core)
    }

    pub fn train_seeds(&self) -> Vec<u64> {
        self.train.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }
}

/// Objects merge key by key; anything else is replaced.
fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// JSON if it parses, else a bare string (so `--set train.dataset.dir=x`
/// needs no quoting).
fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("bad key {key:?}")));
        }
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just set")
            }
            _ => return Err(CliError::Config(format!("{key:?}: {part:?} is not inside an object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one part")
}
