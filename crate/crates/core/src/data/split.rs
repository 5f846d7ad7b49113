use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Labeled;
use crate::error::{Error, Result};

/// Per-class partition: each class sends `round(fraction · n_c)` rows to
/// train, at least one. Both sides keep the original row order.
pub fn split_stratified<D: Labeled>(data: &D, train_fraction: f64, seed: u64) -> Result<(D, D)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(format!("train fraction {train_fraction}")));
    }
    let labels = data.labels();
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = data.class_names().len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut rows in by_class {
        if rows.is_empty() {
            continue;
        }
        let n = rows.len();
        let take = ((train_fraction * n as f64).round() as usize).clamp(1, n);
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..take]);
        test.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.select(&train), data.select(&test)))
}
