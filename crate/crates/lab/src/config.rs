//! Experiment configuration.
//!
//! A TOML file; every key is optional.
//!
//! ```toml
//! data = "prepared"        # directory written by `prepare`
//! out = "results"
//! kinds = ["user-bias", "linear", "fm", "add", "mul", "tensor"]
//! z = [2, 4, 8, 16, 32, 64]
//! folds = [1, 2, 3, 4, 5]
//! thresholds = [1, 2, 4, 8]
//! seed = 0
//! user_distance = "msd"    # or "mad"
//! clamp_predictions = false
//!
//! [hyper.default]          # applies to every kind
//! optimizer = "adam"
//! learning_rate = 0.001
//!
//! [hyper.fm]               # merged over hyper.default
//! l2_weights = 0.0001
//!
//! [tuning]
//! learning_rates = [0.01, 0.001, 0.0001]
//! epochs = [5, 10, 20]
//! validation_fraction = 0.1
//! ```
//!
//! Command-line flags are applied after the file and win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use embedlab_core::evaluation::UserDistance;
use embedlab_core::models::{ModelKind, EMBEDDING_SIZES};
use embedlab_core::training::HyperParams;
use serde::{Deserialize, Serialize};

use crate::cache::sha256_hex;
use crate::error::{read_text, LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub validation_fraction: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig { learning_rates: vec![1e-2, 1e-3, 1e-4], epochs: vec![5, 10, 20], validation_fraction: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub kinds: Vec<ModelKind>,
    pub z: Vec<usize>,
    pub folds: Vec<u32>,
    pub thresholds: Vec<u32>,
    pub seed: u64,
    pub user_distance: UserDistance,
    pub clamp_predictions: bool,
    /// `default` plus optional per-kind tables, merged key by key.
    pub hyper: BTreeMap<String, toml::Table>,
    pub tuning: TuningConfig,
}

fn default_hyper() -> BTreeMap<String, toml::Table> {
    let mut default = toml::Table::new();
    default.insert("optimizer".into(), "adam".into());
    default.insert("learning_rate".into(), 1e-3.into());
    default.insert("epochs".into(), 10.into());
    default.insert("batch_size".into(), 64.into());
    let mut fm = toml::Table::new();
    fm.insert("l2_weights".into(), 1e-4.into());
    fm.insert("l2_embeddings".into(), 1e-4.into());
    BTreeMap::from([("default".to_string(), default), ("fm".to_string(), fm)])
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: PathBuf::from("prepared"),
            out: PathBuf::from("results"),
            kinds: ModelKind::ALL.to_vec(),
            z: EMBEDDING_SIZES.to_vec(),
            folds: vec![1, 2, 3, 4, 5],
            thresholds: vec![1, 2, 4, 8],
            seed: 0,
            user_distance: UserDistance::MeanSquaredDifference,
            clamp_predictions: false,
            hyper: default_hyper(),
            tuning: TuningConfig::default(),
        }
    }
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kinds: Option<Vec<ModelKind>>,
    pub z: Option<Vec<usize>>,
    pub folds: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<String>,
    pub activation: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.data {
            self.data = v.clone();
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.kinds {
            self.kinds = v.clone();
        }
        if let Some(v) = &o.z {
            self.z = v.clone();
        }
        if let Some(v) = &o.folds {
            self.folds = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        let mut flags = toml::Table::new();
        if let Some(v) = o.epochs {
            flags.insert("epochs".into(), (v as i64).into());
        }
        if let Some(v) = o.learning_rate {
            flags.insert("learning_rate".into(), v.into());
        }
        if let Some(v) = &o.optimizer {
            flags.insert("optimizer".into(), v.clone().into());
        }
        if let Some(v) = &o.activation {
            flags.insert("activation".into(), v.clone().into());
        }
        if !flags.is_empty() {
            let names: Vec<String> = self.hyper.keys().cloned().collect();
            for name in names.into_iter().chain(["default".to_string()]) {
                self.hyper.entry(name).or_default().extend(flags.clone());
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(LabError::Config("no model kinds selected".into()));
        }
        if self.z.is_empty() || self.z.contains(&0) {
            return Err(LabError::Config("z values must be positive and at least one is needed".into()));
        }
        if self.folds.is_empty() || self.folds.iter().any(|f| !(1..=5).contains(f)) {
            return Err(LabError::Config("folds must be drawn from 1..5".into()));
        }
        if self.thresholds.contains(&0) {
            return Err(LabError::Config("PDC thresholds must be at least 1".into()));
        }
        for name in self.hyper.keys() {
            if name != "default" && name.parse::<ModelKind>().is_err() {
                return Err(LabError::Config(format!("[hyper.{name}] names no model kind")));
            }
        }
        for kind in &self.kinds {
            self.hyper_for(*kind)?;
        }
        Ok(())
    }

    /// `hyper.default` merged with `hyper.<kind>`.
    pub fn hyper_for(&self, kind: ModelKind) -> Result<HyperParams> {
        let mut merged = self.hyper.get("default").cloned().unwrap_or_default();
        if let Some(specific) = self.hyper.get(kind.as_str()) {
            merged.extend(specific.clone());
        }
        let hp: HyperParams = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| LabError::Config(format!("hyperparameters for {kind}: {e}")))?;
        hp.validate()?;
        Ok(hp)
    }

    /// The kind × z grid; baselines appear once with z = 0.
    pub fn grid(&self) -> Vec<(ModelKind, usize)> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            if kind.is_baseline() {
                out.push((kind, 0));
            } else {
                out.extend(self.z.iter().map(|&z| (kind, z)));
            }
        }
        out
    }

    /// Digest of the resolved configuration, paths excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.data = PathBuf::new();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}
