//! Runs the synthetic benchmark: every default task over several seeds, scoring each
//! sub-model alone, their plain average, and the stacked ensemble.
//!
//! `cargo run --release --example benchmark -- [seeds]`

use std::time::Instant;

use gpstack::metrics::TauVariant;
use gpstack::pipeline::{score_variants, train_task, training_seed, TaskSettings};
use gpstack::rank_transform::BackTransform;
use gpstack::synthetic::{gen_task, TaskGenerator, DEFAULT_TASKS};

fn main() -> gpstack::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let start = Instant::now();
    let mut stacked = Vec::new();
    let mut average = Vec::new();
    let mut per_model: Vec<(String, Vec<f64>)> = Vec::new();
    for seed in 0..seeds {
        for task_id in 1..=DEFAULT_TASKS {
            let gen = TaskGenerator::for_task(seed, task_id);
            let task = gen_task(&gen, task_id)?;
            let rows: Vec<_> = task
                .train
                .iter()
                .map(|l| (l.arch.clone(), l.rank))
                .collect();
            let task_seed = training_seed(seed, task_id);
            let settings = TaskSettings::with_seed(task_seed)?;
            let (ens, _) = train_task::<f64>(task_id, &rows, &gen.schema, &settings)?;
            let archs: Vec<_> = task.test.iter().map(|l| l.arch.clone()).collect();
            let truth: Vec<_> = task.test.iter().map(|l| l.rank).collect();
            let v = score_variants(&ens, &archs, &truth, BackTransform::Exact, TauVariant::B)?;
            println!(
                "seed {seed} task {task_id}: stacked {:.4} average {:.4} best-single {:.4} weights {:?}",
                v.stacked,
                v.average,
                v.submodels.iter().map(|s| s.1).fold(f64::MIN, f64::max),
                ens.meta.weights().iter().map(|w| (w * 100.0).round() / 100.0).collect::<Vec<_>>()
            );
            stacked.push(v.stacked);
            average.push(v.average);
            if per_model.is_empty() {
                per_model = v
                    .submodels
                    .iter()
                    .map(|(n, _)| (n.clone(), Vec::new()))
                    .collect();
            }
            for (slot, (_, t)) in per_model.iter_mut().zip(&v.submodels) {
                slot.1.push(*t);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for (name, t) in &per_model {
        println!("{name:>12}: {:.4}", mean(t));
    }
    println!("{:>12}: {:.4}", "average", mean(&average));
    println!("{:>12}: {:.4}", "stacked", mean(&stacked));
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
