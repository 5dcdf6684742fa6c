use gpstack::gbm::{submodel_pool, PresetOverride};
use gpstack::metrics::TauVariant;
use gpstack::pipeline::{predict_latents, predict_task, score_variants, train_task, TaskSettings};
use gpstack::rank_transform::BackTransform;
use gpstack::synthetic::{gen_task, SyntheticTask, TaskGenerator};
use gpstack::{Ensemble, Ensemble32};

fn task() -> (TaskGenerator, SyntheticTask) {
    let gen = TaskGenerator {
        n_train: 150,
        n_test: 300,
        seed: 11,
        ..TaskGenerator::for_task(11, 2)
    };
    let task = gen_task(&gen, 2).unwrap();
    (gen, task)
}

fn settings() -> TaskSettings {
    let short = PresetOverride {
        n_iterations: Some(60),
        ..Default::default()
    };
    let overrides = ["gbrt-mse", "catgb-mse", "lightgbm"]
        .into_iter()
        .map(|n| (n.to_string(), short.clone()))
        .collect();
    let names: Vec<String> = ["gbrt-mse", "catgb-mse", "lightgbm"]
        .map(String::from)
        .to_vec();
    TaskSettings {
        pool: submodel_pool(3, Some(&names), &overrides).unwrap(),
        ..TaskSettings::with_seed(3).unwrap()
    }
}

#[test]
fn single_and_double_precision_rank_alike() {
    let (gen, task) = task();
    let rows: Vec<_> = task
        .train
        .iter()
        .map(|l| (l.arch.clone(), l.rank))
        .collect();
    let archs: Vec<_> = task.test.iter().map(|l| l.arch.clone()).collect();
    let truth: Vec<usize> = task.test.iter().map(|l| l.rank).collect();

    let (e64, r64) = train_task::<f64>(2, &rows, &gen.schema, &settings()).unwrap();
    let (e32, r32) = train_task::<f32>(2, &rows, &gen.schema, &settings()).unwrap();
    assert_eq!(r64.fold_sizes, r32.fold_sizes);

    let s64 = score_variants(&e64, &archs, &truth, BackTransform::Exact, TauVariant::B).unwrap();
    let s32 = score_variants(&e32, &archs, &truth, BackTransform::Exact, TauVariant::B).unwrap();
    assert!(s64.stacked > 0.4, "{s64:?}");
    assert!(
        (s64.stacked - s32.stacked).abs() < 0.02,
        "{s64:?} vs {s32:?}"
    );
}

#[test]
fn ensemble_json_round_trip_preserves_predictions() {
    let (gen, task) = task();
    let rows: Vec<_> = task
        .train
        .iter()
        .map(|l| (l.arch.clone(), l.rank))
        .collect();
    let archs: Vec<_> = task.test.iter().map(|l| l.arch.clone()).collect();

    let (e, _) = train_task::<f64>(2, &rows, &gen.schema, &settings()).unwrap();
    let text = e.to_json().unwrap();
    let back = Ensemble::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    let a = predict_latents(&e, &archs).unwrap();
    let b = predict_latents(&back, &archs).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(
        predict_task(&e, &archs, 300).unwrap(),
        predict_task(&back, &archs, 300).unwrap()
    );

    let (e32, _) = train_task::<f32>(2, &rows, &gen.schema, &settings()).unwrap();
    let back32 = Ensemble32::from_json(&e32.to_json().unwrap()).unwrap();
    assert_eq!(
        predict_task(&e32, &archs, 300).unwrap(),
        predict_task(&back32, &archs, 300).unwrap()
    );
}

#[test]
fn training_is_deterministic() {
    let (gen, task) = task();
    let rows: Vec<_> = task
        .train
        .iter()
        .map(|l| (l.arch.clone(), l.rank))
        .collect();
    let (a, ra) = train_task::<f64>(2, &rows, &gen.schema, &settings()).unwrap();
    let (b, rb) = train_task::<f64>(2, &rows, &gen.schema, &settings()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(ra, rb);
}
