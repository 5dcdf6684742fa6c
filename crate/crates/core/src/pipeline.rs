//! Task-level glue: encode → logit labels → stack, and the matching predict path.

use serde::{Deserialize, Serialize};

use crate::encoding::{
    drop_constant_columns, encode_batch, Encoding, RawArchitecture, SearchSpaceSchema,
};
use crate::error::{Error, Result};
use crate::gbm::{submodel_pool, GbmModel, NamedConfig};
use crate::linalg::Matrix;
use crate::metrics::{kendall_tau, TauVariant};
use crate::rank_transform::{latent_to_rank, ranks_to_latents, BackTransform};
use crate::scalar::Scalar;
use crate::stacking::{fit_stack, FeatureSpec, StackEnsemble, StackParams};
use crate::synthetic::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSettings {
    pub pool: Vec<NamedConfig>,
    pub stack: StackParams,
    pub encoding: Encoding,
    pub tau: TauVariant,
}

/// Seed for a task's pool and folds, kept separate from the data-generation streams.
pub fn training_seed(seed: u64, task: u32) -> u64 {
    derive_seed(derive_seed(seed, TRAINING_STREAM), u64::from(task))
}

const TRAINING_STREAM: u64 = 0x7472_6169_6e;

impl TaskSettings {
    /// All seven presets, default folds and ridge, ordinal features, tau-b. Both the pool
    /// seeds and the fold seed derive from `seed`.
    pub fn with_seed(seed: u64) -> Result<Self> {
        Ok(TaskSettings {
            pool: submodel_pool(seed, None, &Default::default())?,
            stack: StackParams {
                fold_seed: seed,
                ..StackParams::default()
            },
            encoding: Encoding::Ordinal,
            tau: TauVariant::B,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmodelReport {
    pub name: String,
    /// Kendall tau between the sub-model's out-of-fold latents and the training latents.
    pub oof_tau: f64,
    pub meta_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub task: u32,
    pub n_train: usize,
    pub folds: usize,
    pub fold_seed: u64,
    pub fold_sizes: Vec<usize>,
    pub dropped_columns: Vec<String>,
    pub submodels: Vec<SubmodelReport>,
    pub meta_intercept: f64,
    pub meta_noise_var: f64,
    pub meta_ridge: f64,
}

fn encode_checked<T: Scalar>(
    archs: &[RawArchitecture],
    schema: &SearchSpaceSchema,
    encoding: Encoding,
) -> Result<(Matrix<T>, Vec<String>)> {
    schema.validate()?;
    Ok(encode_batch(archs, schema, encoding))
}

/// Trains one task from `(architecture, rank)` pairs. Ranks must lie in `[0, n)`.
pub fn train_task<T: Scalar>(
    task: u32,
    rows: &[(RawArchitecture, usize)],
    schema: &SearchSpaceSchema,
    settings: &TaskSettings,
) -> Result<(StackEnsemble<T>, TrainReport)> {
    let inner = || -> Result<(StackEnsemble<T>, TrainReport)> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Data(format!(
                "need at least 2 training rows, got {n}"
            )));
        }
        let archs: Vec<RawArchitecture> = rows.iter().map(|(a, _)| a.clone()).collect();
        let ranks: Vec<usize> = rows.iter().map(|&(_, r)| r).collect();
        let (full, names) = encode_checked::<T>(&archs, schema, settings.encoding)?;
        let (x, mask) = drop_constant_columns(&full, &names)?;
        let z: Vec<T> = ranks_to_latents(&ranks, n)?;

        let fit = fit_stack(&x, &z, &settings.pool, &settings.stack)?;
        let mut ensemble = fit.ensemble;
        let meta = &ensemble.meta;
        let submodels = settings
            .pool
            .iter()
            .enumerate()
            .map(|(j, p)| {
                Ok(SubmodelReport {
                    name: p.name.clone(),
                    oof_tau: kendall_tau(&fit.oof.column(j), &z, settings.tau).unwrap_or(0.0),
                    meta_weight: meta.weights()[j].as_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let report = TrainReport {
            task,
            n_train: n,
            folds: ensemble.folds.k,
            fold_seed: ensemble.folds.seed,
            fold_sizes: ensemble.folds.fold_sizes(),
            dropped_columns: mask.dropped_names.clone(),
            submodels,
            meta_intercept: meta.intercept_value().as_f64(),
            meta_noise_var: meta.noise_var.as_f64(),
            meta_ridge: meta.ridge.as_f64(),
        };
        ensemble.features = Some(FeatureSpec {
            schema: schema.clone(),
            encoding: settings.encoding,
            mask,
        });
        Ok((ensemble, report))
    };
    inner().map_err(|e| e.in_task(task))
}

/// Encodes architectures exactly as at training time.
pub fn encode_for<T: Scalar>(
    ensemble: &StackEnsemble<T>,
    archs: &[RawArchitecture],
) -> Result<Matrix<T>> {
    let spec = ensemble
        .features
        .as_ref()
        .ok_or_else(|| Error::Data("ensemble carries no feature specification".into()))?;
    let (full, _) = encode_checked::<T>(archs, &spec.schema, spec.encoding)?;
    spec.mask.apply(&full)
}

pub fn predict_latents<T: Scalar>(
    ensemble: &StackEnsemble<T>,
    archs: &[RawArchitecture],
) -> Result<Vec<T>> {
    if archs.is_empty() {
        return Ok(Vec::new());
    }
    ensemble.stack_predict(&encode_for(ensemble, archs)?)
}

/// Integer ranks among `n_test` candidates, in input order.
pub fn predict_task<T: Scalar>(
    ensemble: &StackEnsemble<T>,
    archs: &[RawArchitecture],
    n_test: usize,
) -> Result<Vec<usize>> {
    if archs.is_empty() {
        return Ok(Vec::new());
    }
    ensemble.predict_ranks(&encode_for(ensemble, archs)?, n_test)
}

/// Test-set tau of each sub-model alone, their plain average, and the stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScores {
    pub submodels: Vec<(String, f64)>,
    pub average: f64,
    pub stacked: f64,
}

pub fn score_variants<T: Scalar>(
    ensemble: &StackEnsemble<T, GbmModel<T>>,
    archs: &[RawArchitecture],
    true_ranks: &[usize],
    back_transform: BackTransform,
    tau: TauVariant,
) -> Result<VariantScores> {
    let n = archs.len();
    if true_ranks.len() != n {
        return Err(Error::Shape {
            context: "true ranks",
            expected: n,
            got: true_ranks.len(),
        });
    }
    let x = encode_for(ensemble, archs)?;
    let sub = ensemble.submodel_predictions(&x)?;
    let truth: Vec<f64> = true_ranks.iter().map(|&r| r as f64).collect();
    let score = |latents: &[T]| -> Result<f64> {
        let ranks: Vec<f64> = latents
            .iter()
            .map(|&z| latent_to_rank(z, n, back_transform) as f64)
            .collect();
        kendall_tau(&ranks, &truth, tau)
    };
    let m = sub.cols();
    let submodels = (0..m)
        .map(|j| Ok((ensemble.submodel_names[j].clone(), score(&sub.column(j))?)))
        .collect::<Result<Vec<_>>>()?;
    let avg: Vec<T> = sub
        .row_iter()
        .map(|r| r.iter().copied().sum::<T>() / T::from_count(m))
        .collect();
    let stacked = ensemble.meta.predict_mean(&sub)?;
    Ok(VariantScores {
        submodels,
        average: score(&avg)?,
        stacked: score(&stacked)?,
    })
}
