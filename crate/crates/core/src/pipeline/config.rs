use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::archive::sha256_hex;
use crate::boruta::BorutaConfig;
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::gbdt::BoostParams;

fn default_gamma() -> f64 {
    10.0
}

fn default_finetune_delta() -> f64 {
    0.01
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    /// Fine-tune from a fresh model instead of the pretrained one.
    pub skip_pretrain: bool,
    pub skip_boruta: bool,
    /// Train the classifier on real rows only.
    pub skip_augment: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Upper bound on synthesized rows per class.
    pub max_rows_per_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: Option<PathBuf>,
    pub train: Option<PathBuf>,
    /// Held-out file; when absent the training file is split.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Share of each class kept for training when splitting.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Pretraining settings; fine-tuning reuses them with its own delta.
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default = "default_finetune_delta")]
    pub finetune_stop_delta: f64,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub boost: BoostParams,
    #[serde(default)]
    pub boruta: BorutaConfig,
    #[serde(default)]
    pub stages: StageToggles,
    /// Evaluate the pipeline with and without pretraining in `ablate`.
    #[serde(default = "default_true")]
    pub ablation_metrics: bool,
    /// Master seed; every stage seed derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        field: field.into(),
        reason: reason.into(),
    }
}

impl PipelineConfig {
    /// Parse a config document; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.schema, &mut cfg.train, &mut cfg.test].into_iter().flatten() {
            resolve(p);
        }
        resolve(&mut cfg.out);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, path) in [("schema", &self.schema), ("train", &self.train)] {
            match path {
                None => return Err(invalid(field, "missing")),
                Some(p) if !p.is_file() => return Err(invalid(field, format!("{} not found", p.display()))),
                _ => {}
            }
        }
        if let Some(p) = &self.test {
            if !p.is_file() {
                return Err(invalid("test", format!("{} not found", p.display())));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction", "must lie in (0, 1)"));
        }
        if !(self.finetune_stop_delta >= 0.0) {
            return Err(invalid("finetune_stop_delta", "must be >= 0"));
        }
        if !(self.boruta.alpha > 0.0 && self.boruta.alpha < 1.0) {
            return Err(invalid("boruta.alpha", "must lie in (0, 1)"));
        }
        self.gan.validate()?;
        self.boost.validate()?;
        self.boruta.boost.validate()
    }

    pub fn schema_path(&self) -> &Path {
        self.schema.as_deref().expect("validated")
    }

    pub fn train_path(&self) -> &Path {
        self.train.as_deref().expect("validated")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Seed of a named stage, derived from the master seed.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(format!("{master}:{stage}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}
