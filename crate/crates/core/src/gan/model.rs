use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::GanConfig;
use crate::archive::{self, ArchiveKind};
use crate::autodiff::{AdamState, NetworkSpec, ParamArchive, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Fresh,
    Pretrained,
    Finetuned { class: usize, class_name: String },
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Fresh => write!(f, "fresh"),
            Phase::Pretrained => write!(f, "pretrained"),
            Phase::Finetuned { class_name, .. } => write!(f, "finetuned:{class_name}"),
        }
    }
}

/// A network with its parameters and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    pub adam: AdamState,
}

impl Net {
    pub fn new(spec: NetworkSpec, seed: u64, cfg: &GanConfig) -> Result<Self> {
        let params = ParamSet::init(&spec, seed)?;
        let adam = AdamState::new(&params, cfg.adam());
        Ok(Self { spec, params, adam })
    }

    /// Same weights, zeroed optimizer state.
    pub fn transfer(&self, cfg: &GanConfig) -> Self {
        Self {
            spec: self.spec.clone(),
            params: self.params.clone(),
            adam: AdamState::new(&self.params, cfg.adam()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Net,
    pub critic: Net,
    pub feature_dim: usize,
    pub noise_dim: usize,
    pub phase: Phase,
    /// Class table of the data the model was fine-tuned on.
    pub class_names: Vec<String>,
    pub normal_class: usize,
}

impl GanModel {
    pub fn generator_hash(&self) -> String {
        self.generator.params.content_hash()
    }

    pub fn critic_hash(&self) -> String {
        self.critic.params.content_hash()
    }

    pub fn archive(&self) -> GanArchive {
        GanArchive {
            feature_dim: self.feature_dim,
            noise_dim: self.noise_dim,
            phase: self.phase.clone(),
            class_names: self.class_names.clone(),
            normal_class: self.normal_class,
            generator: ParamArchive::new(self.generator.spec.clone(), self.generator.params.clone()),
            critic: ParamArchive::new(self.critic.spec.clone(), self.critic.params.clone()),
        }
    }

    pub fn from_archive(a: GanArchive, cfg: &GanConfig) -> Result<Self> {
        a.generator.verify()?;
        a.critic.verify()?;
        let net = |p: ParamArchive| Net {
            adam: AdamState::new(&p.params, cfg.adam()),
            spec: p.spec,
            params: p.params,
        };
        Ok(Self {
            generator: net(a.generator),
            critic: net(a.critic),
            feature_dim: a.feature_dim,
            noise_dim: a.noise_dim,
            phase: a.phase,
            class_names: a.class_names,
            normal_class: a.normal_class,
        })
    }

    pub(crate) fn expect_phase(&self, ok: bool, expected: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::WrongPhase {
                expected: expected.into(),
                found: self.phase.to_string(),
            })
        }
    }
}

/// Serialized weights of both networks with phase and class tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanArchive {
    pub feature_dim: usize,
    pub noise_dim: usize,
    pub phase: Phase,
    pub class_names: Vec<String>,
    pub normal_class: usize,
    pub generator: ParamArchive,
    pub critic: ParamArchive,
}

impl GanArchive {
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        archive::write(path, ArchiveKind::Gan, self)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        archive::read(path, ArchiveKind::Gan)
    }
}

/// Fresh generator/critic pair for `feature_dim`-wide rows.
pub fn build_gan(feature_dim: usize, cfg: &GanConfig) -> Result<GanModel> {
    if feature_dim == 0 {
        return Err(Error::InvalidDimension("feature_dim must be >= 1".into()));
    }
    cfg.validate()?;
    let noise_dim = cfg.noise_dim.unwrap_or(feature_dim);
    Ok(GanModel {
        generator: Net::new(NetworkSpec::generator(noise_dim, feature_dim), cfg.seed, cfg)?,
        critic: Net::new(NetworkSpec::critic(feature_dim), cfg.seed ^ 0x9e37_79b9_7f4a_7c15, cfg)?,
        feature_dim,
        noise_dim,
        phase: Phase::Fresh,
        class_names: Vec::new(),
        normal_class: 0,
    })
}
