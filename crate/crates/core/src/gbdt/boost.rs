use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bins::BinMapper;
use super::efb::{efb_bundle, BundleMap};
use super::goss::goss_sample;
use super::params::BoostParams;
use super::tree::{grow_tree, TrainView, Tree, TreeParams};
use crate::archive::{self, ArchiveKind};
use crate::data::Dataset;
use crate::error::{Error, Result};

const PRIOR_FLOOR: f64 = 1e-12;

/// Fitted multiclass model: `score_k(x) = base_k + η · Σ_m tree_{m,k}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub num_classes: usize,
    pub learning_rate: f64,
    pub base_scores: Vec<f64>,
    /// `trees[m][k]`: round `m`, class `k`.
    pub trees: Vec<Vec<Tree>>,
    pub mapper: BinMapper,
    pub bundles: BundleMap,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Mean training cross-entropy before the first round and after each.
    pub train_log_loss: Vec<f64>,
}

/// Bin every column of `train`.
pub fn bin_features(train: &Dataset, max_bins: usize) -> Result<(BinMapper, Vec<Vec<u16>>)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mapper = BinMapper::fit(&train.features, train.width, max_bins)?;
    let bins = mapper.transform(&train.features);
    Ok((mapper, bins))
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in s.iter_mut() {
        *v /= z;
    }
}

fn log_loss(probs: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * k + y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n as f64
}

fn round_seed(seed: u64, round: usize, class: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (class as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// Softmax gradient boosting on an encoded dataset.
pub fn fit(train: &Dataset, params: &BoostParams) -> Result<Ensemble> {
    params.validate()?;
    if train.is_empty() || train.width == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = train.num_classes();
    let counts = train.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let n = train.rows();
    let (mapper, feature_bins) = bin_features(train, params.max_bins)?;
    let num_bins: Vec<usize> = (0..mapper.width()).map(|f| mapper.num_bins(f)).collect();
    let bundles = if params.use_efb {
        efb_bundle(&feature_bins, &num_bins, params.max_conflict)
    } else {
        BundleMap::singletons(&num_bins)
    };
    let bundle_bins = bundles.encode(&feature_bins);
    let view = TrainView {
        feature_bins: &feature_bins,
        bundle_bins: &bundle_bins,
        bundles: &bundles,
        num_bins: &num_bins,
        boundaries: &mapper.boundaries,
    };
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        lambda: params.lambda_leaf,
    };

    let base_scores: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();
    let mut scores: Vec<f64> = (0..n).flat_map(|_| base_scores.iter().copied()).collect();
    let probabilities = |scores: &[f64]| {
        let mut p = scores.to_vec();
        crate::par::for_each_chunk(&mut p, k, n * k * 4, |_, row| softmax_in_place(row));
        p
    };
    let mut probs = probabilities(&scores);
    let mut train_log_loss = vec![log_loss(&probs, &train.labels, k)];
    let mut trees = Vec::with_capacity(params.rounds);

    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..params.rounds {
        let mut round_trees = Vec::with_capacity(k);
        for class in 0..k {
            let g: Vec<f64> = (0..n)
                .map(|i| probs[i * k + class] - f64::from(u8::from(train.labels[i] == class)))
                .collect();
            let (rows, weights) = goss_sample(&g, params.goss_a, params.goss_b, round_seed(params.seed, round, class))?;
            for (&r, &w) in rows.iter().zip(&weights) {
                let p = probs[r * k + class];
                grad[r] = w * g[r];
                hess[r] = w * p * (1.0 - p);
            }
            let rows: Vec<u32> = rows.into_iter().map(|r| r as u32).collect();
            round_trees.push(grow_tree(&view, rows, &grad, &hess, &tree_params));
        }
        let lr = params.learning_rate;
        crate::par::for_each_chunk(&mut scores, k, n * k * params.max_depth.max(1), |i, row| {
            for (s, t) in row.iter_mut().zip(&round_trees) {
                *s += lr * t.predict_binned(&feature_bins, i);
            }
        });
        probs = probabilities(&scores);
        train_log_loss.push(log_loss(&probs, &train.labels, k));
        trees.push(round_trees);
    }

    Ok(Ensemble {
        num_classes: k,
        learning_rate: params.learning_rate,
        base_scores,
        trees,
        mapper,
        bundles,
        feature_names: train.feature_names.clone(),
        class_names: train.class_names.clone(),
        train_log_loss,
    })
}

impl Ensemble {
    pub fn width(&self) -> usize {
        self.mapper.width()
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::ShapeMismatch(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.width()
            )));
        }
        Ok(())
    }

    pub fn predict_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        let mut s = self.base_scores.clone();
        for round in &self.trees {
            for (v, t) in s.iter_mut().zip(round) {
                *v += self.learning_rate * t.predict(row);
            }
        }
        Ok(s)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.predict_scores(row)?;
        softmax_in_place(&mut s);
        Ok(s)
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        let s = self.predict_scores(row)?;
        Ok(argmax(&s))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        if data.width != self.width() {
            return Err(Error::ShapeMismatch(format!(
                "dataset has {} features, model expects {}",
                data.width,
                self.width()
            )));
        }
        let work = self.trees.len() * self.num_classes * 8;
        Ok(crate::par::map_indices(data.rows(), work, |i| {
            self.predict(data.row(i)).expect("width checked")
        }))
    }

    /// Total split gain per feature.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.width()];
        for t in self.trees.iter().flatten() {
            for (f, gain) in t.splits() {
                imp[f] += gain;
            }
        }
        imp
    }

    pub fn importance_csv(&self) -> String {
        let mut out = String::from("feature,importance\n");
        for (name, v) in self.feature_names.iter().zip(self.feature_importance()) {
            out.push_str(&format!("{name},{v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        archive::write(path, ArchiveKind::Ensemble, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        archive::read(path, ArchiveKind::Ensemble)
    }

    pub fn content_hash(&self) -> Result<String> {
        archive::content_hash(ArchiveKind::Ensemble, self)
    }
}

pub(crate) fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = i;
        }
    }
    best
}

/// Single tree on the squared loss `½(y − f)²` starting from `f = 0`, so
/// `g = −y` and `h = 1`.
pub fn fit_squared_error(features: &[f64], width: usize, targets: &[f64], params: &BoostParams) -> Result<Tree> {
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != targets.len() * width {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: targets.len() * width,
        });
    }
    let mapper = BinMapper::fit(features, width, params.max_bins)?;
    let feature_bins = mapper.transform(features);
    let num_bins: Vec<usize> = (0..width).map(|f| mapper.num_bins(f)).collect();
    let bundles = BundleMap::singletons(&num_bins);
    let view = TrainView {
        feature_bins: &feature_bins,
        bundle_bins: &feature_bins,
        bundles: &bundles,
        num_bins: &num_bins,
        boundaries: &mapper.boundaries,
    };
    let grad: Vec<f64> = targets.iter().map(|y| -y).collect();
    let hess = vec![1.0; targets.len()];
    let p = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        lambda: params.lambda_leaf,
    };
    Ok(grow_tree(&view, (0..targets.len() as u32).collect(), &grad, &hess, &p))
}
