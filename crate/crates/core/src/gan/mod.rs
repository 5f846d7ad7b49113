//! WGAN-GP with a pretraining phase on normal traffic and per-class
//! fine-tuning for minority attack classes.

mod ablation;
mod config;
mod model;
mod synth;
mod train;

pub use ablation::{ablation_pair, AblationPair, ShiftedGaussian};
pub use config::{GanConfig, StopStatistic};
pub use model::{build_gan, GanArchive, GanModel, Net, Phase};
pub use synth::{default_synthesis_count, synthesize, synthesize_encoded};
pub use train::{
    critic_step, finetune, finetune_from_scratch, generator_step, pretrain, CriticStep, StepRecord,
    StopReason, StopRule, TrainTrace,
};
