use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minority_ids::autodiff::{critic_loss, DropoutMasks, NetworkSpec, ParamSet, Tensor};
use minority_ids::data::Dataset;
use minority_ids::gbdt::{fit, BoostParams};
use minority_ids::par::{set_exec_mode, ExecMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn batch(rows: usize, width: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(vec![rows, width], (0..rows * width).map(|_| rng.random()).collect()).unwrap()
}

fn critic(c: &mut Criterion) {
    let mut group = c.benchmark_group("critic_loss");
    group.sample_size(20);
    for dim in [41, 122] {
        let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
        let spec = NetworkSpec::critic(dim);
        let params = ParamSet::init(&spec, 1).unwrap();
        let (real, fake) = (batch(64, dim, &mut rng), batch(64, dim, &mut rng));
        let eps: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let masks = DropoutMasks::sample(&spec, 64, 2).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, dim), &dim, |b, _| {
                set_exec_mode(mode);
                b.iter(|| critic_loss(&spec, &params, &real, &fake, &eps, 10.0, &masks).unwrap())
            });
        }
    }
    group.finish();
}

fn boosting(c: &mut Criterion) {
    let (rows, width, classes) = (20_000, 40, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let features: Vec<f64> = (0..rows * width).map(|_| rng.random()).collect();
    let labels: Vec<usize> = (0..rows)
        .map(|r| ((features[r * width] * 3.0 + features[r * width + 1] * 2.0) as usize).min(classes - 1))
        .collect();
    let data = Dataset::new(
        features,
        width,
        labels,
        (0..width).map(|i| format!("f{i}")).collect(),
        (0..classes).map(|i| format!("c{i}")).collect(),
        0,
    )
    .unwrap();
    let params = BoostParams { rounds: 5, ..Default::default() };
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            set_exec_mode(mode);
            b.iter(|| fit(&data, &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, critic, boosting);
criterion_main!(benches);
