use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::error::{Error, Result};

/// Quantity smoothed by the stop rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopStatistic {
    /// EMA of `|W|`.
    EmaOfAbs,
    /// `|EMA of W|`.
    AbsOfEma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    /// Gradient penalty weight.
    pub lambda: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Critic steps per generator step.
    pub critic_steps: usize,
    /// Defaults to the feature width.
    pub noise_dim: Option<usize>,
    pub stop_delta: f64,
    /// Consecutive critic steps the smoothed statistic must stay under `stop_delta`.
    pub stop_window: usize,
    pub ema_decay: f64,
    /// Starting value of the moving average.
    pub ema_init: f64,
    pub stop_statistic: StopStatistic,
    /// Cap on critic steps.
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
            batch_size: 64,
            critic_steps: 5,
            noise_dim: None,
            stop_delta: 0.02,
            stop_window: 200,
            ema_decay: 0.99,
            ema_init: 1.0,
            stop_statistic: StopStatistic::AbsOfEma,
            max_steps: 20_000,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn pretrain() -> Self {
        Self::default()
    }

    pub fn finetune() -> Self {
        Self {
            stop_delta: 0.01,
            ..Self::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::ConfigInvalid {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.lambda >= 0.0) {
            return bad("lambda", "must be >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.critic_steps == 0 {
            return bad("critic_steps", "must be >= 1");
        }
        if !(self.lr > 0.0) {
            return bad("lr", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1/beta2", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay", "must lie in [0, 1)");
        }
        if self.noise_dim == Some(0) {
            return bad("noise_dim", "must be >= 1");
        }
        Ok(())
    }
}
