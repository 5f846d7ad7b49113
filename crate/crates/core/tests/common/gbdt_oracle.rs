use minority_ids::data::Dataset;
use minority_ids::gbdt::{
    efb_bundle, find_split, goss_sample, split_gain, BinMapper, BundleMap, SplitInfo, TrainView, TreeParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small split-search problem. Gradients and hessians are multiples of 1/8
/// so every partial sum is exact whatever the summation order.
pub struct SplitCase {
    pub features: Vec<f64>,
    pub width: usize,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub min_leaf: usize,
}

impl SplitCase {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(2..=64);
        let width = rng.random_range(1..=6);
        let mut features = Vec::with_capacity(rows * width);
        // Mix of sparse 0/1 columns (bundle candidates) and small-integer columns.
        let sparse: Vec<bool> = (0..width).map(|_| rng.random_bool(0.5)).collect();
        for _ in 0..rows {
            for &s in &sparse {
                features.push(if s {
                    f64::from(u8::from(rng.random_bool(0.15)))
                } else {
                    f64::from(rng.random_range(0..12u8))
                });
            }
        }
        let grad = (0..rows).map(|_| f64::from(rng.random_range(-16..=16i8)) / 8.0).collect();
        let hess = (0..rows).map(|_| f64::from(rng.random_range(1..=16u8)) / 8.0).collect();
        let min_leaf = rng.random_range(1..=4);
        Self { features, width, grad, hess, min_leaf }
    }

    pub fn rows(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self, r: usize, f: usize) -> f64 {
        self.features[r * self.width + f]
    }
}

pub const LAMBDA: f64 = 1.0;

/// Exhaustive search over every feature and every cut between consecutive
/// distinct values. Returns `(feature, cut index, gain)`; the first strict
/// maximum in feature-then-cut order wins.
pub fn brute_force_split(case: &SplitCase) -> Option<(usize, usize, f64)> {
    let n = case.rows();
    let g: f64 = case.grad.iter().sum();
    let h: f64 = case.hess.iter().sum();
    let mut best: Option<(usize, usize, f64)> = None;
    for f in 0..case.width {
        let mut uniq: Vec<f64> = (0..n).map(|r| case.value(r, f)).collect();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        for (j, &u) in uniq.iter().enumerate().take(uniq.len().saturating_sub(1)) {
            let left: Vec<usize> = (0..n).filter(|&r| case.value(r, f) <= u).collect();
            if left.len() < case.min_leaf || n - left.len() < case.min_leaf {
                continue;
            }
            let gl: f64 = left.iter().map(|&r| case.grad[r]).sum();
            let hl: f64 = left.iter().map(|&r| case.hess[r]).sum();
            let gain = split_gain(gl, hl, g, h, LAMBDA);
            if gain > 0.0 && best.is_none_or(|b| gain > b.2) {
                best = Some((f, j, gain));
            }
        }
    }
    best
}

/// The library's histogram split search, with or without bundling.
pub fn library_split(case: &SplitCase, bundle: bool) -> Option<SplitInfo> {
    let mapper = BinMapper::fit(&case.features, case.width, 255).unwrap();
    let bins = mapper.transform(&case.features);
    let num_bins: Vec<usize> = (0..case.width).map(|f| mapper.num_bins(f)).collect();
    let bundles = if bundle {
        efb_bundle(&bins, &num_bins, 0.0)
    } else {
        BundleMap::singletons(&num_bins)
    };
    let bundle_bins = bundles.encode(&bins);
    let view = TrainView {
        feature_bins: &bins,
        bundle_bins: &bundle_bins,
        bundles: &bundles,
        num_bins: &num_bins,
        boundaries: &mapper.boundaries,
    };
    let p = TreeParams {
        max_depth: 1,
        min_samples_leaf: case.min_leaf,
        lambda: LAMBDA,
    };
    let rows: Vec<u32> = (0..case.rows() as u32).collect();
    find_split(&view, &rows, &case.grad, &case.hess, &p)
}

pub fn split_matches(case: &SplitCase) -> bool {
    let want = brute_force_split(case);
    [false, true].iter().all(|&bundle| {
        let got = library_split(case, bundle);
        match (want, got) {
            (None, None) => true,
            (Some((f, j, gain)), Some(s)) => s.feature == f && s.bin as usize == j && s.gain == gain,
            _ => false,
        }
    })
}

/// Fixed gradient vector for the sampling bias check.
pub fn goss_gradients(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..n).map(|_| rng.random_range(-1.0..1.0) + 0.1).collect()
}

/// `|mean over seeds of the weighted sampled sum − true sum| / |true sum|`.
pub fn goss_relative_bias(g: &[f64], a: f64, b: f64, seeds: u64) -> f64 {
    let truth: f64 = g.iter().sum();
    let mean = (0..seeds)
        .map(|s| {
            let (rows, w) = goss_sample(g, a, b, s).unwrap();
            rows.iter().zip(&w).map(|(&r, &w)| w * g[r]).sum::<f64>()
        })
        .sum::<f64>()
        / seeds as f64;
    (mean - truth).abs() / truth.abs()
}

/// Rows drawn from three categorical variables (one-hot, 4 + 5 + 6 columns)
/// and two numeric columns; the label depends on both kinds.
pub fn one_hot_dataset(rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [4usize, 5, 6];
    let width = levels.iter().sum::<usize>() + 2;
    let mut features = Vec::with_capacity(rows * width);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut score = 0.0;
        for (v, &l) in levels.iter().enumerate() {
            let pick = rng.random_range(0..l);
            score += if pick == v { 1.0 } else { 0.0 };
            features.extend((0..l).map(|i| f64::from(u8::from(i == pick))));
        }
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        features.extend([x, y]);
        let class = if score + x > 1.2 { 2 } else if y > 0.5 { 1 } else { 0 };
        labels.push(class);
    }
    let names = (0..width).map(|i| format!("f{i}")).collect();
    let classes = vec!["normal".into(), "a".into(), "b".into()];
    Dataset::new(features, width, labels, names, classes, 0).unwrap()
}

/// Column 0 copies the label, column 1 is uniform noise.
pub fn planted_signal(rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(rows * 2);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let y = usize::from(rng.random_bool(0.4));
        features.extend([y as f64, rng.random::<f64>()]);
        labels.push(y);
    }
    Dataset::new(
        features,
        2,
        labels,
        vec!["copy".into(), "noise".into()],
        vec!["normal".into(), "attack".into()],
        0,
    )
    .unwrap()
}
