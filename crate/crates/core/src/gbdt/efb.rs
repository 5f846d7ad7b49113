use serde::{Deserialize, Serialize};

/// Features merged into one column. Feature `features[i]` with `m` bins
/// stores its bins `1..m` at `offsets[i]..offsets[i] + m − 1`; bundle bin 0
/// means every member sits in its bin 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub features: Vec<usize>,
    pub offsets: Vec<usize>,
    pub num_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMap {
    pub bundles: Vec<Bundle>,
}

impl BundleMap {
    /// One bundle per feature.
    pub fn singletons(num_bins: &[usize]) -> Self {
        Self {
            bundles: num_bins
                .iter()
                .enumerate()
                .map(|(f, &m)| Bundle {
                    features: vec![f],
                    offsets: vec![1],
                    num_bins: m.max(1),
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    /// Bundle column values; on a collision the later member wins.
    pub fn encode(&self, bins: &[Vec<u16>]) -> Vec<Vec<u16>> {
        let rows = bins.first().map_or(0, Vec::len);
        crate::par::map_indices(self.bundles.len(), rows * 2, |b| {
            let bundle = &self.bundles[b];
            let mut col = vec![0u16; rows];
            for (&f, &o) in bundle.features.iter().zip(&bundle.offsets) {
                for (v, &x) in col.iter_mut().zip(&bins[f]) {
                    if x > 0 {
                        *v = (o + x as usize - 1) as u16;
                    }
                }
            }
            col
        })
    }
}

/// Greedy bundling of features whose nonzero (bin ≠ 0) rows overlap in at
/// most `max_conflict · rows` rows. Features are visited by decreasing
/// nonzero count and placed in the first bundle that accepts them.
pub fn efb_bundle(bins: &[Vec<u16>], num_bins: &[usize], max_conflict: f64) -> BundleMap {
    if bins.is_empty() {
        return BundleMap { bundles: Vec::new() };
    }
    let rows = bins[0].len();
    let words = rows.div_ceil(64);
    let masks: Vec<Vec<u64>> = bins
        .iter()
        .map(|col| {
            let mut m = vec![0u64; words];
            for (r, &b) in col.iter().enumerate() {
                if b > 0 {
                    m[r / 64] |= 1 << (r % 64);
                }
            }
            m
        })
        .collect();
    let nonzero: Vec<u32> = masks.iter().map(|m| m.iter().map(|w| w.count_ones()).sum()).collect();
    let mut order: Vec<usize> = (0..bins.len()).collect();
    order.sort_by(|&a, &b| nonzero[b].cmp(&nonzero[a]).then(a.cmp(&b)));
    let budget = (max_conflict * rows as f64).floor() as u64;

    struct Open {
        bundle: Bundle,
        mask: Vec<u64>,
        conflicts: u64,
    }
    let mut open: Vec<Open> = Vec::new();
    for f in order {
        let extra = num_bins[f].max(1) - 1;
        let slot = open.iter().position(|o| {
            let overlap: u64 = o
                .mask
                .iter()
                .zip(&masks[f])
                .map(|(a, b)| (a & b).count_ones() as u64)
                .sum();
            o.conflicts + overlap <= budget && o.bundle.num_bins + extra <= u16::MAX as usize
        });
        match slot {
            Some(i) => {
                let o = &mut open[i];
                let overlap: u64 = o
                    .mask
                    .iter()
                    .zip(&masks[f])
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum();
                o.conflicts += overlap;
                for (a, b) in o.mask.iter_mut().zip(&masks[f]) {
                    *a |= b;
                }
                o.bundle.features.push(f);
                o.bundle.offsets.push(o.bundle.num_bins);
                o.bundle.num_bins += extra;
            }
            None => open.push(Open {
                bundle: Bundle {
                    features: vec![f],
                    offsets: vec![1],
                    num_bins: 1 + extra,
                },
                mask: masks[f].clone(),
                conflicts: 0,
            }),
        }
    }
    BundleMap {
        bundles: open.into_iter().map(|o| o.bundle).collect(),
    }
}
