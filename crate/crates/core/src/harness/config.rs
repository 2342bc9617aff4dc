use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_idx, make_split, synth_blobs, Dataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::inner::{GroupingMode, SchedulerSpec};
use crate::numeric::{EpsPolicy, NetworkSpec};
use crate::oho::MetaConfig;

/// Full description of one training run; also the JSON config schema
/// (unknown keys are rejected).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub dataset: DatasetSource,
    /// Hyperparameter sharing; defaults to a single global group.
    #[serde(default = "default_grouping")]
    pub grouping: GroupingMode,
    /// Whether weights and biases share one learning rate. Defaults to true in
    /// global mode and false otherwise.
    #[serde(default)]
    pub tie_alpha: Option<bool>,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub lambda0: f64,
    pub method: Method,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturbation: Option<PerturbationSchedule>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub hvp_eps: EpsPolicy,
}

fn default_grouping() -> GroupingMode {
    GroupingMode::Global
}

fn default_alpha0() -> f64 {
    0.001
}

fn default_batch_size() -> usize {
    100
}

/// Exactly one of: online hyperparameter optimization, or a fixed schedule baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Oho(MetaConfig),
    Scheduler(SchedulerSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Blobs {
        n_classes: usize,
        n_per_class: usize,
        dim: usize,
        spread: f64,
        val_count: usize,
        /// Per-class size of an independently drawn test set (0 = no test set).
        #[serde(default)]
        test_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        val_count: usize,
        /// Keep only the first `limit` training-pool examples.
        #[serde(default)]
        limit: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    Alpha,
    Lambda,
}

/// Forced overwrites of every learning rate (or every decay) at the start of the listed epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSchedule {
    pub target: PerturbTarget,
    pub value: f64,
    pub epochs: Vec<usize>,
    /// Stop adapting hyperparameters from the first perturbation on.
    #[serde(default)]
    pub freeze: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default = "yes")]
    pub influence_norms: bool,
    #[serde(default = "yes")]
    pub grad_correlation: bool,
    #[serde(default = "default_window")]
    pub gc_window: usize,
}

fn yes() -> bool {
    true
}

fn default_window() -> usize {
    100
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            influence_norms: true,
            grad_correlation: true,
            gc_window: default_window(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn tie_alpha(&self) -> bool {
        self.tie_alpha
            .unwrap_or(matches!(self.grouping, GroupingMode::Global))
    }

    pub fn meta(&self) -> Option<&MetaConfig> {
        match &self.method {
            Method::Oho(m) => Some(m),
            Method::Scheduler(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.epochs == 0 {
            return Err(Error::config("epochs: must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size: must be >= 1"));
        }
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return Err(Error::config("alpha0: must be a finite value >= 0"));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(Error::config("lambda0: must be a finite value >= 0"));
        }
        match &self.method {
            Method::Oho(m) => m.validate()?,
            Method::Scheduler(s) => s.validate()?,
        }
        if let Some(p) = &self.perturbation {
            if self.meta().is_none() {
                return Err(Error::config(
                    "perturbation: only supported together with method.oho",
                ));
            }
            if !(p.value >= 0.0 && p.value.is_finite()) {
                return Err(Error::config("perturbation.value: must be >= 0"));
            }
            if p.epochs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(
                    "perturbation.epochs: must be strictly increasing",
                ));
            }
        }
        if self.diagnostics.gc_window < 2 {
            return Err(Error::config("diagnostics.gc_window: must be >= 2"));
        }
        match &self.dataset {
            DatasetSource::Blobs {
                n_classes,
                n_per_class,
                dim,
                spread,
                ..
            } => {
                if *n_classes == 0 || *n_per_class == 0 || *dim == 0 {
                    return Err(Error::config("dataset: blob counts must be >= 1"));
                }
                if spread.is_nan() || *spread < 0.0 {
                    return Err(Error::config("dataset.spread: must be >= 0"));
                }
            }
            DatasetSource::Idx {
                test_images,
                test_labels,
                ..
            } => {
                if test_images.is_some() != test_labels.is_some() {
                    return Err(Error::config(
                        "dataset: test_images and test_labels must be given together",
                    ));
                }
            }
        }
        Ok(())
    }
}

impl DatasetSource {
    /// Loads (or generates) the data and splits off the validation set.
    pub fn load(&self) -> Result<DatasetSplit> {
        match self {
            DatasetSource::Blobs {
                n_classes,
                n_per_class,
                dim,
                spread,
                val_count,
                test_per_class,
                seed,
            } => {
                let (x, y) = synth_blobs(*n_classes, *n_per_class, *dim, *spread, *seed)?;
                let mut split = make_split(x, y, *val_count, *seed)?;
                if *test_per_class > 0 {
                    let (tx, ty) = synth_blobs(
                        *n_classes,
                        *test_per_class,
                        *dim,
                        *spread,
                        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
                    )?;
                    split.test = Dataset::new(tx, ty)?;
                }
                Ok(split)
            }
            DatasetSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                val_count,
                limit,
                seed,
            } => {
                let (mut x, mut y) = load_idx(train_images, train_labels)?;
                if let Some(n) = *limit {
                    if n < y.len() {
                        let idx: Vec<usize> = (0..n).collect();
                        x = x.select_rows(&idx);
                        y.truncate(n);
                    }
                }
                let mut split = make_split(x, y, *val_count, *seed)?;
                if let (Some(ti), Some(tl)) = (test_images, test_labels) {
                    let (tx, ty) = load_idx(ti, tl)?;
                    split.test = Dataset::new(tx, ty)?;
                }
                Ok(split)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "network": {"layer_sizes": [2, 8, 3]},
        "dataset": {"kind": "blobs", "n_classes": 3, "n_per_class": 20, "dim": 2, "spread": 0.3, "val_count": 10},
        "method": {"oho": {"eta": 0.001}},
        "epochs": 2
    }"#;

    #[test]
    fn parses_minimal_with_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.batch_size, 100);
        assert_eq!(c.grouping, GroupingMode::Global);
        assert!(c.tie_alpha());
        assert_eq!(c.meta().unwrap().val_batch_size, 100);
        assert_eq!(c.diagnostics.gc_window, 100);
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace(",\n        \"epochs\": 2", "");
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("epochs"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"epochs\": 2", "\"epochs\": 2, \"epohcs\": 3");
        assert!(RunConfig::from_json(&text).is_err());
        let text = MINIMAL.replace("\"spread\": 0.3", "\"spread\": 0.3, \"sprad\": 1");
        assert!(RunConfig::from_json(&text).is_err());
        let text = MINIMAL.replace("\"eta\": 0.001", "\"eta\": 0.001, \"momentum\": 0.9");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn validation_rules() {
        let text = MINIMAL.replace("\"epochs\": 2", "\"epochs\": 2, \"perturbation\": {\"target\": \"alpha\", \"value\": 0.2, \"epochs\": [3, 1]}");
        assert!(RunConfig::from_json(&text)
            .unwrap_err()
            .to_string()
            .contains("strictly increasing"));
        let text = MINIMAL.replace(
            "{\"oho\": {\"eta\": 0.001}}",
            "{\"scheduler\": {\"kind\": \"cosine\", \"base_lr\": 0.1, \"horizon\": 0}}",
        );
        assert!(RunConfig::from_json(&text).is_err());
        let text = MINIMAL.replace("\"grouping\"", "x").replace(
            "\"epochs\": 2",
            "\"epochs\": 2, \"grouping\": {\"mode\": \"grouped\", \"k\": 2}",
        );
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(c.grouping, GroupingMode::Grouped { k: 2 });
        assert!(!c.tie_alpha());
    }

    #[test]
    fn blobs_split_sizes() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let s = c.dataset.load().unwrap();
        assert_eq!(s.train.len(), 50);
        assert_eq!(s.validation.len(), 10);
        assert!(s.test.is_empty());
    }
}
