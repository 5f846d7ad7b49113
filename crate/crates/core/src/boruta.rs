//! Shadow-feature selection: a real feature earns a hit in a round when its
//! importance beats every permuted copy's, and the hit count over all
//! rounds is tested against a fair coin.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbdt::{fit, BoostParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureStatus {
    Accepted,
    Rejected,
    Tentative,
}

impl FeatureStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
            Self::Tentative => "tentative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecision {
    pub features: Vec<String>,
    pub status: Vec<FeatureStatus>,
    pub hits: Vec<usize>,
    pub rounds: usize,
    pub alpha: f64,
}

impl FeatureDecision {
    pub fn with_status(&self, s: FeatureStatus) -> Vec<usize> {
        (0..self.features.len()).filter(|&i| self.status[i] == s).collect()
    }

    /// Columns kept for the classifier, in their original order.
    pub fn selected(&self, include_tentative: bool) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&i| match self.status[i] {
                FeatureStatus::Accepted => true,
                FeatureStatus::Tentative => include_tentative,
                FeatureStatus::Rejected => false,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,status,hits,rounds\n");
        for i in 0..self.features.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.features[i],
                self.status[i].as_str(),
                self.hits[i],
                self.rounds
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BorutaConfig {
    pub rounds: usize,
    pub alpha: f64,
    pub include_tentative: bool,
    /// Run on a stratified sample of at most this many rows.
    pub max_rows: Option<usize>,
    pub boost: BoostParams,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            alpha: 0.05,
            include_tentative: true,
            max_rows: Some(5000),
            boost: BoostParams {
                rounds: 20,
                min_samples_leaf: 5,
                ..BoostParams::default()
            },
        }
    }
}

/// `ln C(n, k)`.
fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `P(X <= k)` for `X ~ Binomial(n, 1/2)`.
fn binom_cdf_half(n: usize, k: usize) -> f64 {
    let ln_half_n = n as f64 * 0.5f64.ln();
    (0..=k.min(n))
        .map(|i| (ln_choose(n, i) + ln_half_n).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Two-sided p-value of `k` hits in `n` fair trials.
pub fn two_sided_p(n: usize, k: usize) -> f64 {
    let lower = binom_cdf_half(n, k);
    let upper = if k == 0 { 1.0 } else { 1.0 - binom_cdf_half(n, k - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

fn with_shadows(train: &Dataset, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let n = train.rows();
    let w = train.width;
    let mut features = Vec::with_capacity(n * 2 * w);
    let perms: Vec<Vec<usize>> = (0..w)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    for i in 0..n {
        features.extend_from_slice(train.row(i));
        features.extend(perms.iter().enumerate().map(|(f, p)| train.row(p[i])[f]));
    }
    let mut names = train.feature_names.clone();
    names.extend(train.feature_names.iter().map(|s| format!("shadow:{s}")));
    Dataset::new(
        features,
        2 * w,
        train.labels.clone(),
        names,
        train.class_names.clone(),
        train.normal_class,
    )
}

pub fn boruta_select(
    train: &Dataset,
    rounds: usize,
    alpha: f64,
    boost_params: &BoostParams,
    seed: u64,
) -> Result<FeatureDecision> {
    if train.is_empty() || train.width == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidFraction(format!("alpha={alpha}")));
    }
    let w = train.width;
    let mut hits = vec![0usize; w];
    for round in 0..rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round as u64));
        let augmented = with_shadows(train, &mut rng)?;
        let params = BoostParams {
            seed: boost_params.seed.wrapping_add(round as u64),
            ..boost_params.clone()
        };
        let importance = fit(&augmented, &params)?.feature_importance();
        let max_shadow = importance[w..].iter().copied().fold(0.0, f64::max);
        for (h, &imp) in hits.iter_mut().zip(&importance[..w]) {
            if imp > max_shadow {
                *h += 1;
            }
        }
    }
    let status = hits
        .iter()
        .map(|&k| {
            if rounds == 0 || two_sided_p(rounds, k) > alpha {
                FeatureStatus::Tentative
            } else if 2 * k > rounds {
                FeatureStatus::Accepted
            } else {
                FeatureStatus::Rejected
            }
        })
        .collect();
    Ok(FeatureDecision {
        features: train.feature_names.clone(),
        status,
        hits,
        rounds,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_tail_by_hand() {
        // P(X <= 1) for n = 3: (1 + 3) / 8.
        assert!((binom_cdf_half(3, 1) - 0.5).abs() < 1e-15);
        // n = 20, k = 15: 2 · (C(20,15)+...+C(20,20)) / 2^20 = 2 · 21700 / 1048576.
        assert!((two_sided_p(20, 15) - 43400.0 / 1_048_576.0).abs() < 1e-12);
        assert_eq!(two_sided_p(20, 10), 1.0);
    }

    #[test]
    fn zero_rounds_leave_everything_tentative() {
        let data = Dataset::new(
            vec![0.0, 1.0, 1.0, 0.0],
            2,
            vec![0, 1],
            vec!["a".into(), "b".into()],
            vec!["n".into(), "x".into()],
            0,
        )
        .unwrap();
        let d = boruta_select(&data, 0, 0.05, &BoostParams::default(), 1).unwrap();
        assert_eq!(d.status, vec![FeatureStatus::Tentative; 2]);
        assert_eq!(d.hits, vec![0, 0]);
    }
}
