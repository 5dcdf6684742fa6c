//! K-fold stacked generalization.
//!
//! Every sub-model is fitted twice over: once on all rows (the models used at inference)
//! and once per fold on the complementary rows, producing an out-of-fold meta-feature
//! matrix. The Bayesian linear meta-estimator is trained on that matrix only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::encoding::{ColumnMask, Encoding, SearchSpaceSchema};
use crate::error::{Error, Result};
use crate::gbm::{gbm_fit, GbmConfig, GbmModel, NamedConfig};
use crate::gpnas::{fit_meta, GpnasModel};
use crate::linalg::Matrix;
use crate::rank_transform::{latent_to_rank, BackTransform};
use crate::scalar::Scalar;

pub const ENSEMBLE_FORMAT: &str = "gpstack-ensemble";
pub const ENSEMBLE_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 5;

pub trait Predictor<T> {
    fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>>;
}

/// A sub-model recipe that can be fitted repeatedly on different row subsets.
pub trait Learner<T: Scalar>: Sync {
    type Model: Predictor<T> + Send;
    fn name(&self) -> &str;
    fn fit(&self, x: &Matrix<T>, y: &[T]) -> Result<Self::Model>;
}

impl<T: Scalar> Predictor<T> for GbmModel<T> {
    fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        GbmModel::predict(self, x)
    }
}

impl<T: Scalar> Learner<T> for NamedConfig {
    type Model = GbmModel<T>;
    fn name(&self) -> &str {
        &self.name
    }
    fn fit(&self, x: &Matrix<T>, y: &[T]) -> Result<GbmModel<T>> {
        gbm_fit(x, y, &self.config)
    }
}

impl<T: Scalar> Learner<T> for GbmConfig {
    type Model = GbmModel<T>;
    fn name(&self) -> &str {
        "gbm"
    }
    fn fit(&self, x: &Matrix<T>, y: &[T]) -> Result<GbmModel<T>> {
        gbm_fit(x, y, self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every row.
    pub assignment: Vec<usize>,
}

impl FoldSpec {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of `0..n`, dealt round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldSpec> {
    if k < 2 {
        return Err(Error::config(
            "folds",
            format!("need at least 2 folds, got {k}"),
        ));
    }
    if k > n {
        return Err(Error::config("folds", format!("{k} folds exceed {n} rows")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldSpec {
        k,
        seed,
        assignment,
    })
}

/// `M[i][j]` is sub-model `j`'s prediction for row `i` from a fit that excluded row `i`'s fold.
pub fn oof_predictions<T: Scalar, L: Learner<T>>(
    learners: &[L],
    x: &Matrix<T>,
    z: &[T],
    folds: &FoldSpec,
) -> Result<Matrix<T>> {
    let n = x.rows();
    if z.len() != n || folds.n() != n {
        return Err(Error::Shape {
            context: "out-of-fold inputs",
            expected: n,
            got: if z.len() != n { z.len() } else { folds.n() },
        });
    }
    if learners.is_empty() {
        return Err(Error::config("pool", "no sub-models"));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.k)
        .map(|f| (folds.training_rows(f), folds.fold_rows(f)))
        .collect();
    if let Some(f) = splits.iter().position(|(train, _)| train.len() < 2) {
        return Err(Error::Data(format!(
            "fold {f} leaves fewer than 2 training rows"
        )));
    }

    let m = learners.len();
    let jobs: Vec<(usize, usize)> = (0..folds.k)
        .flat_map(|f| (0..m).map(move |j| (f, j)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(f, j)| {
            let (train, held) = &splits[f];
            let xt = x.select_rows(train);
            let zt: Vec<T> = train.iter().map(|&i| z[i]).collect();
            let learner = &learners[j];
            let model = learner
                .fit(&xt, &zt)
                .map_err(|e| e.in_submodel(learner.name()))?;
            model
                .predict(&x.select_rows(held))
                .map_err(|e| e.in_submodel(learner.name()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Matrix::zeros(n, m);
    for (&(f, j), preds) in jobs.iter().zip(results) {
        for (&row, p) in splits[f].1.iter().zip(preds) {
            out[(row, j)] = p;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSettings {
    /// Population size of the training labels.
    pub n_train: usize,
    pub back_transform: BackTransform,
}

/// How raw architectures become the ensemble's input columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub schema: SearchSpaceSchema,
    pub encoding: Encoding,
    pub mask: ColumnMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize, M: Serialize",
    deserialize = "T: DeserializeOwned, M: DeserializeOwned"
))]
pub struct StackEnsemble<T, M = GbmModel<T>> {
    pub format: String,
    pub version: u32,
    pub features: Option<FeatureSpec>,
    pub n_features: usize,
    pub folds: FoldSpec,
    pub submodel_names: Vec<String>,
    pub submodels: Vec<M>,
    pub meta: GpnasModel<T>,
    pub transform: TransformSettings,
}

/// Fitted ensemble plus the out-of-fold matrix it was trained on.
#[derive(Debug, Clone)]
pub struct StackFit<T, M> {
    pub ensemble: StackEnsemble<T, M>,
    pub oof: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackParams {
    pub folds: usize,
    pub fold_seed: u64,
    pub ridge: f64,
    pub back_transform: BackTransform,
}

impl Default for StackParams {
    fn default() -> Self {
        StackParams {
            folds: DEFAULT_FOLDS,
            fold_seed: 0,
            ridge: crate::gpnas::DEFAULT_RIDGE,
            back_transform: BackTransform::Exact,
        }
    }
}

pub fn fit_stack<T: Scalar, L: Learner<T>>(
    x: &Matrix<T>,
    z: &[T],
    pool: &[L],
    params: &StackParams,
) -> Result<StackFit<T, L::Model>> {
    let n = x.rows();
    if z.len() != n {
        return Err(Error::Shape {
            context: "stack targets",
            expected: n,
            got: z.len(),
        });
    }
    let folds = make_folds(n, params.folds, params.fold_seed)?;

    let submodels = pool
        .par_iter()
        .map(|l| l.fit(x, z).map_err(|e| e.in_submodel(l.name())))
        .collect::<Result<Vec<_>>>()?;
    let oof = oof_predictions(pool, x, z, &folds)?;
    let meta = fit_meta(&oof, z, T::lit(params.ridge))?;

    Ok(StackFit {
        ensemble: StackEnsemble {
            format: ENSEMBLE_FORMAT.to_string(),
            version: ENSEMBLE_VERSION,
            features: None,
            n_features: x.cols(),
            folds,
            submodel_names: pool.iter().map(|l| l.name().to_string()).collect(),
            submodels,
            meta,
            transform: TransformSettings {
                n_train: n,
                back_transform: params.back_transform,
            },
        },
        oof,
    })
}

impl<T: Scalar, M: Predictor<T> + Sync> StackEnsemble<T, M> {
    /// Full-data sub-model predictions, one column per sub-model.
    pub fn submodel_predictions(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.n_features {
            return Err(Error::Shape {
                context: "stack predict",
                expected: self.n_features,
                got: x.cols(),
            });
        }
        let cols = self
            .submodels
            .par_iter()
            .zip(&self.submodel_names)
            .map(|(m, name)| m.predict(x).map_err(|e| e.in_submodel(name)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Matrix::zeros(x.rows(), cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn stack_predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        self.meta.predict_mean(&self.submodel_predictions(x)?)
    }

    /// Per-row integer ranks among `n_test` candidates. Ties are possible.
    pub fn predict_ranks(&self, x: &Matrix<T>, n_test: usize) -> Result<Vec<usize>> {
        if n_test < 2 {
            return Err(Error::Domain(format!(
                "population size {n_test} is below 2"
            )));
        }
        Ok(self
            .stack_predict(x)?
            .into_iter()
            .map(|z| latent_to_rank(z, n_test, self.transform.back_transform))
            .collect())
    }
}

impl<T: Scalar, M: Serialize + DeserializeOwned> StackEnsemble<T, M> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text)?;
        if e.format != ENSEMBLE_FORMAT {
            return Err(Error::Serde(format!(
                "not an ensemble file (format `{}`)",
                e.format
            )));
        }
        if e.version != ENSEMBLE_VERSION {
            return Err(Error::Serde(format!(
                "unsupported ensemble version {}",
                e.version
            )));
        }
        if e.submodels.len() != e.submodel_names.len() || e.meta.input_width() != e.submodels.len()
        {
            return Err(Error::Serde(
                "ensemble sub-model count is inconsistent".into(),
            ));
        }
        Ok(e)
    }
}
