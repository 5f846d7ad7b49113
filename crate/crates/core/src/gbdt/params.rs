use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    /// GOSS fraction of large-gradient rows kept.
    pub goss_a: f64,
    /// GOSS fraction of the remaining rows sampled.
    pub goss_b: f64,
    /// Largest tolerated share of rows where bundled features collide.
    pub max_conflict: f64,
    pub use_efb: bool,
    /// L2 penalty on leaf values.
    pub lambda_leaf: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 8,
            max_bins: 255,
            min_samples_leaf: 20,
            goss_a: 0.2,
            goss_b: 0.1,
            max_conflict: 0.0,
            use_efb: true,
            lambda_leaf: 1.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        check_goss(self.goss_a, self.goss_b)?;
        let bad = |field: &str, reason: &str| {
            Err(Error::ConfigInvalid {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if !(2..=u16::MAX as usize).contains(&self.max_bins) {
            return bad("max_bins", "must lie in [2, 65535]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.max_conflict) {
            return bad("max_conflict", "must lie in [0, 1]");
        }
        if !(self.lambda_leaf >= 0.0) {
            return bad("lambda_leaf", "must be >= 0");
        }
        Ok(())
    }
}

pub(crate) fn check_goss(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-12) || (a < 1.0 && b == 0.0 && a == 0.0) {
        return Err(Error::InvalidFraction(format!("GOSS a={a}, b={b}")));
    }
    Ok(())
}
