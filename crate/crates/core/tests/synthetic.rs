//! Statistical properties of the synthetic task generator, checked over seeds.

use gpstack::encoding::Encoding;
use gpstack::gbm::submodel_pool;
use gpstack::metrics::{kendall_tau_b, TauVariant};
use gpstack::pipeline::{score_variants, train_task, TaskSettings};
use gpstack::rank_transform::BackTransform;
use gpstack::stacking::StackParams;
use gpstack::synthetic::{gen_task, TaskGenerator};

const SEEDS: u64 = 10;

fn generator(noise_sd: f64, seed: u64) -> TaskGenerator {
    TaskGenerator {
        noise_sd,
        seed,
        n_train: 100,
        n_test: 400,
        ..TaskGenerator::default()
    }
}

/// Tau between the noise-free test latents and the observed test ranks: the best any
/// predictor of the architecture alone can do on average.
fn oracle_tau(gen: &TaskGenerator) -> f64 {
    let task = gen_task(gen, 1).unwrap();
    let ranks: Vec<f64> = task.test.iter().map(|l| l.rank as f64).collect();
    kendall_tau_b(&task.hidden.test, &ranks).unwrap()
}

fn seed_mean(f: impl Fn(u64) -> f64) -> f64 {
    (0..SEEDS).map(f).sum::<f64>() / SEEDS as f64
}

#[test]
fn overwhelming_noise_leaves_nothing_to_learn() {
    let oracle = seed_mean(|s| oracle_tau(&generator(1e6, s)));
    assert!(oracle.abs() < 0.1, "oracle tau {oracle}");

    let names: Vec<String> = ["gbrt-mse", "lightgbm"].map(String::from).to_vec();
    let overrides = [("gbrt-mse", 40), ("lightgbm", 40)]
        .into_iter()
        .map(|(n, it)| {
            let o = gpstack::gbm::PresetOverride {
                n_iterations: Some(it),
                ..Default::default()
            };
            (n.to_string(), o)
        })
        .collect();
    let trained = seed_mean(|s| {
        let gen = generator(1e6, s);
        let task = gen_task(&gen, 1).unwrap();
        let settings = TaskSettings {
            pool: submodel_pool(s, Some(&names), &overrides).unwrap(),
            stack: StackParams {
                fold_seed: s,
                ..StackParams::default()
            },
            encoding: Encoding::Ordinal,
            tau: TauVariant::B,
        };
        let rows: Vec<_> = task
            .train
            .iter()
            .map(|l| (l.arch.clone(), l.rank))
            .collect();
        let (e, _) = train_task::<f64>(1, &rows, &gen.schema, &settings).unwrap();
        let archs: Vec<_> = task.test.iter().map(|l| l.arch.clone()).collect();
        let truth: Vec<usize> = task.test.iter().map(|l| l.rank).collect();
        score_variants(&e, &archs, &truth, BackTransform::Exact, TauVariant::B)
            .unwrap()
            .stacked
    });
    assert!(trained.abs() < 0.1, "stacked tau {trained}");
}

#[test]
fn more_noise_means_lower_achievable_tau() {
    let levels = [0.1, 0.5, 2.0];
    let taus: Vec<f64> = levels
        .iter()
        .map(|&sd| seed_mean(|s| oracle_tau(&generator(sd, s))))
        .collect();
    assert!(
        taus.windows(2).all(|w| w[0] >= w[1]),
        "{levels:?} -> {taus:?}"
    );
    assert!(taus[0] > 0.8, "{taus:?}");
}

#[test]
fn fixed_seed_gives_identical_tasks() {
    let gen = generator(0.3, 5);
    let a = serde_json::to_string(&gen_task(&gen, 3).unwrap()).unwrap();
    let b = serde_json::to_string(&gen_task(&gen, 3).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = serde_json::to_string(&gen_task(&gen, 4).unwrap()).unwrap();
    assert_ne!(a, other);
}
