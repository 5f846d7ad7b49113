#![allow(dead_code)]

use minority_ids::autodiff::{DropoutMasks, NetworkSpec, ParamSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Below this magnitude both gradients count as zero.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Central difference of `f` at `params` along coordinate `index`.
pub fn central_difference(f: &impl Fn(&ParamSet) -> f64, params: &ParamSet, index: usize) -> f64 {
    let mut p = params.clone();
    let x = params.get(index);
    p.set(index, x + FD_STEP);
    let up = f(&p);
    p.set(index, x - FD_STEP);
    let down = f(&p);
    (up - down) / (2.0 * FD_STEP)
}

/// Largest relative error over `probes` random coordinates.
pub fn max_probe_error(
    f: impl Fn(&ParamSet) -> f64,
    params: &ParamSet,
    analytic: &ParamSet,
    probes: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.len();
    (0..probes)
        .map(|_| {
            let i = rng.random_range(0..n);
            rel_err(analytic.get(i), central_difference(&f, params, i))
        })
        .fold(0.0, f64::max)
}

pub fn uniform_batch(rows: usize, width: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * width).map(|_| rng.random::<f64>()).collect();
    Tensor::new(vec![rows, width], data).unwrap()
}

pub fn uniform_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// A random critic together with a real/fake batch, interpolation weights
/// and train-mode dropout masks.
pub struct CriticCase {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    pub real: Tensor,
    pub fake: Tensor,
    pub eps: Vec<f64>,
    pub masks: DropoutMasks,
}

impl CriticCase {
    pub fn new(dim: usize, batch: usize, seed: u64) -> Self {
        let spec = NetworkSpec::critic(dim);
        Self {
            params: ParamSet::init(&spec, seed).unwrap(),
            real: uniform_batch(batch, dim, seed + 1),
            fake: uniform_batch(batch, dim, seed + 2),
            eps: uniform_weights(batch, seed + 3),
            masks: DropoutMasks::sample(&spec, batch, seed + 4).unwrap(),
            spec,
        }
    }
}
pub mod gbdt_oracle;

/// Pipeline config on the bundled mini dataset with short training runs.
pub fn mini_config(out: &std::path::Path) -> minority_ids::pipeline::PipelineConfig {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let mut cfg = minority_ids::pipeline::PipelineConfig::from_file(&root.join("configs/mini.json")).unwrap();
    cfg.gan.max_steps = 150;
    cfg.boost.rounds = 15;
    cfg.boruta.rounds = 3;
    cfg.out = out.to_path_buf();
    cfg
}
pub mod metric_oracle;
