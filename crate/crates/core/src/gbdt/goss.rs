use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::check_goss;
use crate::error::{Error, Result};

/// Keep the `⌈a·n⌉` rows of largest `|g|` with weight 1 and a uniform draw
/// of `⌈b·n⌉` of the rest with weight `(1 − a) / b`. Rows come back in
/// ascending order.
pub fn goss_sample(gradients: &[f64], a: f64, b: f64, seed: u64) -> Result<(Vec<usize>, Vec<f64>)> {
    check_goss(a, b)?;
    let n = gradients.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if a >= 1.0 {
        return Ok(((0..n).collect(), vec![1.0; n]));
    }
    let top = ((a * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| gradients[j].abs().total_cmp(&gradients[i].abs()).then(i.cmp(&j)));
    let rest = &order[top..];
    let want = ((b * n as f64).ceil() as usize).min(rest.len());
    let weight = if b > 0.0 { (1.0 - a) / b } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<(usize, f64)> = order[..top].iter().map(|&i| (i, 1.0)).collect();
    picked.extend(index::sample(&mut rng, rest.len(), want).into_iter().map(|k| (rest[k], weight)));
    picked.sort_unstable_by_key(|p| p.0);
    Ok(picked.into_iter().unzip())
}
