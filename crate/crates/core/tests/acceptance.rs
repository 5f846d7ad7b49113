//! One line per acceptance criterion. Criteria that need the public
//! intrusion datasets report BLOCKED when the files are absent; set
//! `ACCEPTANCE_REQUIRE_DATA=1` to count that as a failure.
//!
//! `cargo test --test acceptance -- 4 9` runs a subset.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::gbdt_oracle::{goss_gradients, goss_relative_bias, one_hot_dataset, split_matches, SplitCase};
use common::metric_oracle::matches_naive_recount;
use common::{max_probe_error, mini_config, CriticCase};
use minority_ids::autodiff::{critic_loss, gp_double_backward, interpolate, ParamSet, Tensor, DropoutMasks};
use minority_ids::data::{load_dataset, DatasetSchema};
use minority_ids::filter::{class_census, filter_minority};
use minority_ids::gan::{ablation_pair, GanConfig, ShiftedGaussian};
use minority_ids::gbdt::{fit, BoostParams};
use minority_ids::metrics::{evaluate, EvalReport};
use minority_ids::pipeline::{Pipeline, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Outcome::*;

type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn data_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn nsl_files() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("NSLKDD_DIR").map(PathBuf::from).unwrap_or_else(|| data_root().join("nsl-kdd"));
    let (train, test) = (dir.join("KDDTrain+.txt"), dir.join("KDDTest+.txt"));
    (train.is_file() && test.is_file()).then_some((train, test))
}

fn cic_file() -> Option<PathBuf> {
    let f = std::env::var_os("CICIDS2018_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| data_root().join("cic-ids2018/combined.csv"));
    f.is_file().then_some(f)
}

fn nsl_missing() -> Outcome {
    Blocked("NSL-KDD not found (set NSLKDD_DIR to the folder holding KDDTrain+.txt and KDDTest+.txt)".into())
}

fn c1_gradients() -> Outcome {
    let dims = [8, 16, 41];
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let c = CriticCase::new(dims[k as usize % 3], 4, 1000 + 17 * k);
        let loss = |p: &ParamSet| critic_loss(&c.spec, p, &c.real, &c.fake, &c.eps, 10.0, &c.masks).unwrap();
        let grads = loss(&c.params).grads;
        worst = worst.max(max_probe_error(|p| loss(p).loss, &c.params, &grads, 100, k));
        let x_hat = interpolate(&c.real, &c.fake, &c.eps).unwrap();
        let gp = |p: &ParamSet| gp_double_backward(&c.spec, p, &x_hat, 10.0, &c.masks).unwrap();
        let grads = gp(&c.params).1;
        worst = worst.max(max_probe_error(|p| gp(p).0, &c.params, &grads, 100, k + 50));
    }
    check(worst <= 1e-4, format!("max relative error {worst:.2e} (limit 1e-4)"))
}

fn c2_closed_form() -> Outcome {
    let spec = minority_ids::autodiff::NetworkSpec {
        input_width: 2,
        layers: vec![minority_ids::autodiff::Layer::Dense { out: 1 }],
    };
    let mut params = ParamSet::init(&spec, 0).unwrap();
    params.entries[0].weight = Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
    params.entries[0].bias = Tensor::new(vec![1], vec![0.0]).unwrap();
    let x = Tensor::new(vec![2, 2], vec![0.3, -1.0, 2.0, 0.5]).unwrap();
    let (penalty, grads) = gp_double_backward(&spec, &params, &x, 10.0, &DropoutMasks::none()).unwrap();
    let gw = grads.entries[0].weight.data();
    let ok = (penalty - 160.0).abs() <= 1e-12 && (gw[0] - 48.0).abs() <= 1e-12 && (gw[1] - 64.0).abs() <= 1e-12;
    check(ok, format!("penalty {penalty}, grad w ({}, {})", gw[0], gw[1]))
}

fn c3_census() -> Outcome {
    let Some((train, test)) = nsl_files() else {
        return nsl_missing();
    };
    let schema = DatasetSchema::from_file(&data_root().join("schemas/nsl_kdd.json")).unwrap();
    let full = load_dataset(&train, &schema).unwrap().concat(&load_dataset(&test, &schema).unwrap()).unwrap();
    let census = class_census(&full).unwrap();
    let counts: Vec<usize> = census.classes.iter().map(|c| c.count).collect();
    let ratios: Vec<String> = census.attack_ratios().filter_map(|c| c.display_ratio()).collect();
    let minority: Vec<&str> = filter_minority(&full, 10.0)
        .unwrap()
        .minority_classes()
        .iter()
        .map(|&c| census.classes[c].name.as_str())
        .collect();
    let ok = counts == [77054, 53385, 14077, 3749, 252]
        && ratios == ["1.443", "5.474", "20.553", "305.770"]
        && minority == ["r2l", "u2r"];
    check(ok, format!("counts {counts:?}, ratios {ratios:?}, minority {minority:?}"))
}

fn c4_ablation() -> Outcome {
    let family = ShiftedGaussian::default();
    let pairs: Vec<(usize, usize)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..5u64)
            .map(|seed| {
                let family = &family;
                s.spawn(move || {
                    let p = ablation_pair(family, &GanConfig::pretrain(), &GanConfig::finetune(), seed).unwrap();
                    (p.with_pretraining.steps_to_stop, p.without_pretraining.steps_to_stop)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let median = |mut v: Vec<usize>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let with = median(pairs.iter().map(|p| p.0).collect());
    let without = median(pairs.iter().map(|p| p.1).collect());
    let ratio = with as f64 / without as f64;
    check(ratio <= 0.7, format!("median steps {with} vs {without} (ratio {ratio:.3}, limit 0.7); per seed {pairs:?}"))
}

fn nsl_config(seed: u64, out: &Path) -> PipelineConfig {
    let (train, test) = nsl_files().unwrap();
    let mut cfg = PipelineConfig::from_file(&data_root().join("configs/nsl_kdd.json")).unwrap();
    cfg.train = Some(train);
    cfg.test = Some(test);
    cfg.seed = seed;
    cfg.out = out.to_path_buf();
    cfg
}

fn run_pipeline(cfg: PipelineConfig) -> EvalReport {
    Pipeline::new(cfg, "run").unwrap().run().unwrap().eval.unwrap()
}

fn c5_augmentation() -> Outcome {
    if nsl_files().is_none() {
        return nsl_missing();
    }
    let dir = tempfile::tempdir().unwrap();
    let mut f1 = (Vec::new(), Vec::new());
    let mut gain = (Vec::new(), Vec::new());
    for seed in 0..3 {
        let with = run_pipeline(nsl_config(seed, &dir.path().join(format!("with{seed}"))));
        let mut cfg = nsl_config(seed, &dir.path().join(format!("without{seed}")));
        cfg.stages.skip_augment = true;
        let without = run_pipeline(cfg);
        f1.0.push(with.macro_f1);
        f1.1.push(without.macro_f1);
        let recall = |r: &EvalReport, c: &str| r.recall_of(c).unwrap();
        gain.0.push(recall(&with, "r2l") - recall(&without, "r2l"));
        gain.1.push(recall(&with, "u2r") - recall(&without, "u2r"));
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let (fw, fo, gr, gu) = (median(f1.0), median(f1.1), median(gain.0), median(gain.1));
    check(
        fw >= fo && gr >= 0.05 && gu >= 0.05,
        format!("macro F1 {fw:.4} vs {fo:.4}; recall gain r2l {gr:+.4}, u2r {gu:+.4} (need +0.05)"),
    )
}

fn c6_full_data() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut ran = false;
    if nsl_files().is_some() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_pipeline(nsl_config(1, dir.path()));
        ok &= r.accuracy >= 0.97 && r.macro_f1 >= 0.93;
        parts.push(format!("NSL-KDD accuracy {:.4} macro F1 {:.4} (need 0.97 / 0.93)", r.accuracy, r.macro_f1));
        ran = true;
    } else {
        parts.push("NSL-KDD not found".into());
    }
    if let Some(csv) = cic_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::from_file(&data_root().join("configs/cic_ids2018.json")).unwrap();
        cfg.train = Some(csv);
        cfg.out = dir.path().to_path_buf();
        let r = run_pipeline(cfg);
        ok &= r.accuracy >= 0.93 && r.macro_f1 >= 0.80;
        parts.push(format!("CIC-IDS2018 accuracy {:.4} macro F1 {:.4} (need 0.93 / 0.80)", r.accuracy, r.macro_f1));
        ran = true;
    } else {
        parts.push("CIC-IDS2018 not found (set CICIDS2018_CSV)".into());
    }
    let detail = parts.join("; ");
    match (ran, ok) {
        (false, _) => Blocked(detail),
        (true, ok) => check(ok, detail),
    }
}

fn c7_goss() -> Outcome {
    let bias = goss_relative_bias(&goss_gradients(10_000), 0.2, 0.1, 1000);
    check(bias <= 0.05, format!("relative bias {bias:.4} (limit 0.05)"))
}

fn c8_efb() -> Outcome {
    let data = one_hot_dataset(1000, 3);
    let on = BoostParams { rounds: 10, use_efb: true, max_conflict: 0.0, ..Default::default() };
    let off = BoostParams { use_efb: false, ..on.clone() };
    let a = fit(&data, &on).unwrap();
    let b = fit(&data, &off).unwrap();
    let bundled = a.bundles.bundles.len();
    check(
        bundled < data.width && a.trees == b.trees,
        format!("{} features in {bundled} bundles, trees identical: {}", data.width, a.trees == b.trees),
    )
}

fn c9_splits() -> Outcome {
    let bad: Vec<u64> = (0..50).filter(|&s| !split_matches(&SplitCase::random(s))).collect();
    check(bad.is_empty(), format!("{} of 50 cases match brute force; mismatches {bad:?}", 50 - bad.len()))
}

fn c10_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut agree = 0;
    for _ in 0..20 {
        let k = rng.random_range(2..6);
        let n = rng.random_range(1..40);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        agree += matches_naive_recount(&evaluate(&pred, &truth, k).unwrap(), &pred, &truth, k) as usize;
    }
    // Class 1 is positive: TP 8, FP 2, FN 1, TN 9.
    let truth = [vec![1; 8], vec![0; 2], vec![1; 1], vec![0; 9]].concat();
    let pred = [vec![1; 8], vec![1; 2], vec![0; 1], vec![0; 9]].concat();
    let r = evaluate(&pred, &truth, 2).unwrap();
    let f1 = r.classes[1].f1;
    check(
        agree == 20 && r.accuracy == 0.85 && (f1 - 0.8421).abs() <= 1e-4,
        format!("{agree}/20 random reports match the recount; binary accuracy {} F1 {f1:.4}", r.accuracy),
    )
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| Pipeline::new(mini_config(&dir.path().join(sub)), "run").unwrap().run().unwrap();
    let (a, b) = (run("a"), run("b"));
    let hash = |r: &minority_ids::pipeline::RunArtifacts| r.eval.as_ref().unwrap().content_hash().unwrap();
    let (ea, eb) = (hash(&a), hash(&b));
    check(
        ea == eb && a.model_hash.is_some() && a.model_hash == b.model_hash,
        format!("eval {} / {}, model {:?} / {:?}", &ea[..12], &eb[..12], a.model_hash, b.model_hash),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("gradient correctness", c1_gradients),
        ("closed-form penalty", c2_closed_form),
        ("filter fidelity", c3_census),
        ("pretraining ablation", c4_ablation),
        ("augmentation benefit", c5_augmentation),
        ("full-data scores", c6_full_data),
        ("GOSS unbiasedness", c7_goss),
        ("EFB losslessness", c8_efb),
        ("split oracle", c9_splits),
        ("metric oracle", c10_metrics),
        ("determinism", c11_determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var_os("ACCEPTANCE_REQUIRE_DATA").is_some_and(|v| v == "1");
    let (mut failed, mut blocked) = (0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Blocked(d) => {
                blocked += 1;
                ("BLOCKED", d)
            }
        };
        println!("criterion {n:>2} {tag:<7} {name}: {detail} [{secs:.1}s]");
    }
    println!("acceptance: {failed} failed, {blocked} blocked");
    if failed > 0 || (strict && blocked > 0) {
        std::process::exit(1);
    }
}
