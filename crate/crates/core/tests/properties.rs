mod common;

use common::metric_oracle::matches_naive_recount;
use common::{uniform_batch, CriticCase};
use minority_ids::autodiff::{critic_loss, forward_network, Mode, NetworkSpec, ParamArchive, ParamSet, Tensor};
use minority_ids::data::{
    load_dataset_with, split_stratified, ColumnTransform, DatasetSchema, Labeled, PreprocessPlan, Provenance,
    RawValue,
};
use minority_ids::filter::{class_census, filter_minority};
use minority_ids::gan::{build_gan, finetune, pretrain, GanConfig};
use minority_ids::metrics::evaluate;
use proptest::prelude::*;

const LEVELS: [&str; 3] = ["tcp", "udp", "icmp"];
const CLASSES: [&str; 4] = ["normal", "dos", "probe", "r2l"];

fn schema() -> DatasetSchema {
    serde_json::from_str(
        r#"{
            "columns": [
                {"name": "bytes", "kind": "numeric"},
                {"name": "proto", "kind": "categorical"},
                {"name": "rate", "kind": "numeric"},
                {"name": "label", "kind": "label"}
            ],
            "classes": ["normal", "dos", "probe", "r2l"],
            "normal_class": "normal"
        }"#,
    )
    .unwrap()
}

type Row = (f64, usize, f64, usize);

fn csv_of(rows: &[Row]) -> String {
    rows.iter()
        .map(|(b, p, r, c)| format!("{b},{},{r},{}\n", LEVELS[*p], CLASSES[*c]))
        .collect()
}

fn rows_strategy(min: usize) -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec((-50.0f64..500.0, 0usize..3, 0.0f64..1.0, 0usize..4), min..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverse_then_encode_yields_valid_rows(rows in rows_strategy(1), enc in prop::collection::vec(-0.5f64..1.5, 5 * 8)) {
        let raw = load_dataset_with(csv_of(&rows).as_bytes(), &schema()).unwrap();
        let plan = PreprocessPlan::fit(&raw).unwrap();
        let w = plan.encoded_width();
        let enc = &enc[..8 * w];
        let back = plan.inverse(enc, vec![0; 8], raw.class_names.clone(), 0, Provenance::Synthetic).unwrap();
        for i in 0..8 {
            let row = back.row(i);
            for (t, v) in plan.transforms.iter().zip(&row) {
                match (t, v) {
                    (ColumnTransform::MinMax { min, max, .. }, RawValue::Number(x)) => prop_assert!(*min <= *x && *x <= *max),
                    (ColumnTransform::OneHot { levels, .. }, RawValue::Level(l)) => prop_assert!(levels.contains(l)),
                    _ => prop_assert!(false, "kind mismatch"),
                }
            }
        }
        let again = plan.apply(&back).unwrap();
        for i in 0..8 {
            let r = again.row(i);
            prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
            let k = plan.transforms[1].width();
            let hot = &r[1..1 + k];
            prop_assert_eq!(hot.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(hot.iter().filter(|&&v| v == 0.0).count(), k - 1);
        }
    }

    #[test]
    fn split_keeps_class_proportions(rows in rows_strategy(1), f in 0.05f64..0.95, seed in any::<u64>()) {
        let raw = load_dataset_with(csv_of(&rows).as_bytes(), &schema()).unwrap();
        let (train, test) = split_stratified(&raw, f, seed).unwrap();
        for c in 0..4 {
            let n = raw.labels.iter().filter(|&&l| l == c).count();
            let t = train.labels.iter().filter(|&&l| l == c).count();
            let s = test.labels.iter().filter(|&&l| l == c).count();
            prop_assert_eq!(t + s, n);
            prop_assert!((t as f64 - f * n as f64).abs() <= 1.0);
        }
        let (again, _) = split_stratified(&raw, f, seed).unwrap();
        prop_assert_eq!(again, train);
    }

    #[test]
    fn loading_is_order_stable(rows in rows_strategy(1)) {
        let text = csv_of(&rows);
        let a = load_dataset_with(text.as_bytes(), &schema()).unwrap();
        let b = load_dataset_with(text.as_bytes(), &schema()).unwrap();
        prop_assert_eq!(&a, &b);
        let labels: Vec<usize> = rows.iter().map(|r| r.3).collect();
        prop_assert_eq!(a.labels, labels);
    }

    #[test]
    fn census_and_filter_properties(mut rows in rows_strategy(1), g1 in 0.1f64..20.0, dg in 0.0f64..20.0) {
        rows.push((1.0, 0, 0.5, 0));
        let raw = load_dataset_with(csv_of(&rows).as_bytes(), &schema()).unwrap();
        let census = class_census(&raw).unwrap();
        for c in 0..4 {
            prop_assert_eq!(census.count(c), rows.iter().filter(|r| r.3 == c).count());
        }
        let low = filter_minority(&raw, g1).unwrap();
        let high = filter_minority(&raw, g1 + dg).unwrap();
        let lo = low.minority_classes();
        prop_assert!(high.minority_classes().iter().all(|c| lo.contains(c)));
        let total = low.normal.rows() + low.minority.iter().map(|(_, d)| d.rows()).sum::<usize>() + low.passthrough.rows();
        prop_assert_eq!(total, raw.rows());
        prop_assert!(low.normal.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn metrics_match_naive_recount(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..=50)) {
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let r = evaluate(&p, &t, 4).unwrap();
        prop_assert!(matches_naive_recount(&r, &p, &t, 4));
        let trace: usize = (0..4).map(|c| r.confusion[c][c]).sum();
        let expect = if t.is_empty() { 0.0 } else { trace as f64 / t.len() as f64 };
        prop_assert_eq!(r.accuracy, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eval_forward_is_pure_and_archives_round_trip(dim in 1usize..12, rows in 1usize..6, seed in any::<u64>()) {
        for spec in [NetworkSpec::critic(dim), NetworkSpec::generator(dim, dim)] {
            let params = ParamSet::init(&spec, seed).unwrap();
            let x = uniform_batch(rows, dim, seed ^ 1);
            let (a, _) = forward_network(&spec, &params, &x, Mode::Eval, 1).unwrap();
            let (b, _) = forward_network(&spec, &params, &x, Mode::Eval, 2).unwrap();
            prop_assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
            let bytes = ParamArchive::new(spec.clone(), params.clone()).to_bytes().unwrap();
            let back = ParamArchive::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.params.content_hash(), params.content_hash());
        }
    }

    #[test]
    fn critic_output_bounded_and_penalty_nonnegative(dim in 1usize..10, batch in 1usize..6, seed in 0u64..1_000_000, lambda in 0.0f64..20.0) {
        let case = CriticCase::new(dim, batch, seed);
        let wide: Vec<f64> = case.real.data().iter().map(|v| 3.0 * v - 1.0).collect();
        let x = Tensor::new(vec![batch, dim], wide).unwrap();
        for mode in [Mode::Eval, Mode::Train] {
            let (out, _) = forward_network(&case.spec, &case.params, &x, mode, seed).unwrap();
            prop_assert!(out.data().iter().all(|v| v.abs() < 1.0));
        }
        let l = critic_loss(&case.spec, &case.params, &case.real, &case.fake, &case.eps, lambda, &case.masks).unwrap();
        prop_assert!(l.penalty >= 0.0);
        prop_assert!((l.loss - l.penalty + l.wasserstein).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn training_is_deterministic_and_transfer_is_exact(seed in 0u64..1000, dim in 2usize..6) {
        let normal = uniform_batch(40, dim, seed);
        let minority = uniform_batch(20, dim, seed + 9);
        let as_data = |t: &Tensor, label: usize| {
            minority_ids::data::Dataset::new(
                t.data().to_vec(),
                dim,
                vec![label; t.rows()],
                (0..dim).map(|i| format!("f{i}")).collect(),
                vec!["normal".into(), "x".into()],
                0,
            )
            .unwrap()
        };
        let cfg = GanConfig { max_steps: 12, batch_size: 8, seed, ..GanConfig::pretrain() };
        let run = || pretrain(build_gan(dim, &cfg).unwrap(), &as_data(&normal, 0), &cfg).unwrap();
        let (m1, t1) = run();
        let (m2, t2) = run();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(m1.generator_hash(), m2.generator_hash());
        prop_assert_eq!(m1.critic_hash(), m2.critic_hash());

        let zero = GanConfig { max_steps: 0, ..GanConfig::finetune() };
        let (tuned, _) = finetune(&m1, &as_data(&minority, 1), &zero).unwrap();
        prop_assert_eq!(tuned.generator_hash(), m1.generator_hash());
        prop_assert_eq!(tuned.critic_hash(), m1.critic_hash());
    }
}
