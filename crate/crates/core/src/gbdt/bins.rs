use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile bin boundaries per feature. A value `v` falls in bin
/// `#{boundaries < v}`, so a value equal to a boundary takes the lower bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub boundaries: Vec<Vec<f64>>,
    pub max_bins: usize,
    /// Feature had no more distinct values than `max_bins`.
    pub distinct: Vec<bool>,
}

impl BinMapper {
    /// Fit on a row-major `[rows, width]` matrix.
    pub fn fit(features: &[f64], width: usize, max_bins: usize) -> Result<Self> {
        if width == 0 || features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if max_bins < 2 {
            return Err(Error::InvalidDimension("max_bins must be >= 2".into()));
        }
        let rows = features.len() / width;
        let (boundaries, distinct) = crate::par::map_indices(width, rows * 16, |f| {
            let mut col: Vec<f64> = (0..rows).map(|r| features[r * width + f]).collect();
            col.sort_by(f64::total_cmp);
            column_boundaries(&col, max_bins)
        })
        .into_iter()
        .unzip();
        Ok(Self {
            boundaries,
            max_bins,
            distinct,
        })
    }

    pub fn width(&self) -> usize {
        self.boundaries.len()
    }

    pub fn num_bins(&self, feature: usize) -> usize {
        self.boundaries[feature].len() + 1
    }

    #[inline]
    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        self.boundaries[feature].partition_point(|&b| b < value) as u16
    }

    /// Upper edge of `bin`: values `<=` this edge fall at or below `bin`.
    pub fn upper_edge(&self, feature: usize, bin: usize) -> f64 {
        self.boundaries[feature][bin]
    }

    /// Column-major bins of a row-major matrix.
    pub fn transform(&self, features: &[f64]) -> Vec<Vec<u16>> {
        let width = self.width();
        let rows = features.len() / width;
        crate::par::map_indices(width, rows * 8, |f| {
            (0..rows).map(|r| self.bin(f, features[r * width + f])).collect()
        })
    }
}

/// Boundaries for one sorted column. Few distinct values get one bin each;
/// otherwise cut points sit at the `b·n/max_bins` order statistics, placed
/// midway to the next larger value.
fn column_boundaries(sorted: &[f64], max_bins: usize) -> (Vec<f64>, bool) {
    let mut uniq: Vec<f64> = sorted.to_vec();
    uniq.dedup();
    if uniq.len() <= max_bins {
        let b = uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect();
        return (b, true);
    }
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for b in 1..max_bins {
        let idx = b * n / max_bins;
        if idx == 0 || idx >= n {
            continue;
        }
        let lower = sorted[idx - 1];
        let upper_pos = sorted.partition_point(|&v| v <= lower);
        if upper_pos >= n {
            continue;
        }
        let cut = midpoint(lower, sorted[upper_pos]);
        if out.last().is_none_or(|&last| cut > last) {
            out.push(cut);
        }
    }
    (out, false)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Keep the cut strictly below `b` so `b` lands in the upper bin.
    if m < b {
        m
    } else {
        a
    }
}
