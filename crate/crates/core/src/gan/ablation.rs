//! Synthetic pretraining ablation: normal traffic and a minority class drawn
//! from Gaussians whose means differ by a fixed shift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GanConfig;
use super::model::build_gan;
use super::train::{finetune, finetune_from_scratch, noise, pretrain, TrainTrace};
use crate::data::Dataset;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedGaussian {
    pub dim: usize,
    pub normal_rows: usize,
    pub minority_rows: usize,
    /// Per-coordinate mean of the normal class.
    pub center: f64,
    pub spread: f64,
    /// Added to every coordinate of the minority mean.
    pub shift: f64,
}

impl Default for ShiftedGaussian {
    fn default() -> Self {
        Self {
            dim: 8,
            normal_rows: 2000,
            minority_rows: 200,
            center: 0.4,
            spread: 0.1,
            shift: 0.1,
        }
    }
}

impl ShiftedGaussian {
    fn draw(&self, rows: usize, mean: f64, label: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let z = noise(rows, self.dim, rng)?;
        Dataset::new(
            z.data().iter().map(|v| mean + self.spread * v).collect(),
            self.dim,
            vec![label; rows],
            (0..self.dim).map(|i| format!("f{i}")).collect(),
            vec!["normal".into(), "minority".into()],
            0,
        )
    }

    /// `(normal, minority)` samples.
    pub fn sample(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = self.draw(self.normal_rows, self.center, 0, &mut rng)?;
        let minority = self.draw(self.minority_rows, self.center + self.shift, 1, &mut rng)?;
        Ok((normal, minority))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPair {
    pub pretrain: TrainTrace,
    pub with_pretraining: TrainTrace,
    pub without_pretraining: TrainTrace,
}

/// Fine-tune on the minority sample from the pretrained model and from the
/// same fresh initialization, with identical data and seeds.
pub fn ablation_pair(
    family: &ShiftedGaussian,
    pretrain_cfg: &GanConfig,
    finetune_cfg: &GanConfig,
    seed: u64,
) -> Result<AblationPair> {
    let (normal, minority) = family.sample(seed)?;
    let init = GanConfig {
        seed,
        ..pretrain_cfg.clone()
    };
    let ft = GanConfig {
        seed: seed.wrapping_add(1),
        ..finetune_cfg.clone()
    };
    let fresh = build_gan(family.dim, &init)?;
    let (pretrained, pre_trace) = pretrain(fresh.clone(), &normal, &init)?;
    let (_, with) = finetune(&pretrained, &minority, &ft)?;
    let (_, without) = finetune_from_scratch(fresh, &minority, &ft)?;
    Ok(AblationPair {
        pretrain: pre_trace,
        with_pretraining: with,
        without_pretraining: without,
    })
}
