//! Gradient-boosted regression trees.
//!
//! One engine covers the whole sub-model pool; members differ only in their [`GbmConfig`]
//! (loss, split search, depth, shrinkage, row sampling and seed).

mod pool;
mod tree;

pub use pool::{submodel_pool, NamedConfig, PresetOverride, PRESET_NAMES};
pub use tree::{equal_frequency_edges, fit_tree, Node, RegressionTree, SplitChoice, TreeBuilder};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAX_BINS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    Huber { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitMode {
    /// Midpoints between consecutive distinct values in the node.
    Exact,
    /// Equal-frequency bin edges computed once on the training matrix.
    Histogram { n_bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub loss: Loss,
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    pub split: SplitMode,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            loss: Loss::SquaredError,
            learning_rate: 0.1,
            n_iterations: 100,
            max_depth: 3,
            min_samples_leaf: 1,
            subsample: 1.0,
            split: SplitMode::Exact,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if let Loss::Huber { delta } = self.loss {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::config("huber_delta", "must be positive and finite"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("learning_rate", "must lie in (0, 1]"));
        }
        if self.n_iterations == 0 {
            return Err(Error::config("n_iterations", "must be positive"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("max_depth", "must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf", "must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config("subsample", "must lie in (0, 1]"));
        }
        if let SplitMode::Histogram { n_bins } = self.split {
            if !(2..=MAX_BINS).contains(&n_bins) {
                return Err(Error::config(
                    "n_bins",
                    format!("must lie in [2, {MAX_BINS}]"),
                ));
            }
        }
        Ok(())
    }

    /// Rows drawn per iteration, `⌈subsample · n⌉`.
    pub fn rows_per_iteration(&self, n: usize) -> usize {
        ((self.subsample * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// Negative gradient of the loss at `pred`: the residual, clipped at `±δ` for Huber.
pub fn negative_gradient<T: Scalar>(loss: Loss, y: &[T], pred: &[T]) -> Vec<T> {
    debug_assert_eq!(y.len(), pred.len());
    match loss {
        Loss::SquaredError => y.iter().zip(pred).map(|(&a, &p)| a - p).collect(),
        Loss::Huber { delta } => {
            let d = T::lit(delta);
            y.iter()
                .zip(pred)
                .map(|(&a, &p)| {
                    let r = a - p;
                    if r.abs() <= d {
                        r
                    } else {
                        d * r.signum()
                    }
                })
                .collect()
        }
    }
}

/// Total loss over `rows`, summed in row order.
fn loss_on<T: Scalar>(loss: Loss, y: &[T], pred: &[T], rows: &[usize]) -> T {
    let half = T::lit(0.5);
    rows.iter().fold(T::zero(), |acc, &i| {
        let r = (y[i] - pred[i]).abs();
        let l = match loss {
            Loss::SquaredError => r * r,
            Loss::Huber { delta } => {
                let d = T::lit(delta);
                if r <= d {
                    half * r * r
                } else {
                    d * (r - half * d)
                }
            }
        };
        acc + l
    })
}

fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) * T::lit(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel<T> {
    pub config: GbmConfig,
    pub n_features: usize,
    pub base_prediction: T,
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
}

impl<T: Scalar> GbmModel<T> {
    pub fn predict_row(&self, row: &[T]) -> T {
        self.predict_row_partial(row, self.trees.len())
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_row_partial(&self, row: &[T], n_trees: usize) -> T {
        self.trees[..n_trees.min(self.trees.len())]
            .iter()
            .fold(self.base_prediction, |acc, t| {
                acc + self.learning_rate * t.predict_row(row)
            })
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        self.predict_partial(x, self.trees.len())
    }

    pub fn predict_partial(&self, x: &Matrix<T>, n_trees: usize) -> Result<Vec<T>> {
        if x.cols() != self.n_features {
            return Err(Error::Shape {
                context: "gbm predict",
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(x.row_iter()
            .map(|r| self.predict_row_partial(r, n_trees))
            .collect())
    }
}

pub fn gbm_fit<T: Scalar>(x: &Matrix<T>, z: &[T], cfg: &GbmConfig) -> Result<GbmModel<T>> {
    cfg.validate()?;
    let n = x.rows();
    if z.len() != n {
        return Err(Error::Shape {
            context: "gbm targets",
            expected: n,
            got: z.len(),
        });
    }
    if n < 2 {
        return Err(Error::Data(format!(
            "boosting needs at least 2 rows, got {n}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite target".into()));
    }

    let base = match cfg.loss {
        Loss::SquaredError => z.iter().copied().sum::<T>() / T::from_count(n),
        Loss::Huber { .. } => median(z),
    };
    let lr = T::lit(cfg.learning_rate);
    let builder = TreeBuilder::new(x, cfg.split)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_iter = cfg.rows_per_iteration(n);
    let all_rows: Vec<usize> = (0..n).collect();

    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.n_iterations);
    for _ in 0..cfg.n_iterations {
        let grad = negative_gradient(cfg.loss, z, &pred);
        let sampled;
        let rows: &[usize] = if per_iter == n {
            &all_rows
        } else {
            let mut r = rand::seq::index::sample(&mut rng, n, per_iter).into_vec();
            r.sort_unstable();
            sampled = r;
            &sampled
        };
        let tree = builder.fit(&grad, rows, cfg)?;
        let stepped: Vec<T> = pred
            .iter()
            .zip(x.row_iter())
            .map(|(&p, r)| p + lr * tree.predict_row(r))
            .collect();
        // A shrunken leaf-mean step cannot raise the loss on its own rows in exact
        // arithmetic, so a computed rise is rounding noise and the step is dropped.
        if loss_on(cfg.loss, z, &stepped, rows) < loss_on(cfg.loss, z, &pred, rows) {
            pred = stepped;
            trees.push(tree);
        } else {
            trees.push(RegressionTree::leaf(T::zero(), rows.len()));
        }
    }

    Ok(GbmModel {
        config: cfg.clone(),
        n_features: x.cols(),
        base_prediction: base,
        learning_rate: lr,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Matrix<f64>, Vec<f64>) {
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let i = i as f64;
                [
                    (i * 0.7).sin(),
                    ((i * 0.3).cos() * 2.0).round() / 2.0,
                    (i * 1.9).sin(),
                ]
            })
            .collect();
        let y = rows
            .iter()
            .map(|r| 2.0 * r[0] + r[1] * r[2] + (3.0 * r[2]).tanh())
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn negative_gradient_examples() {
        let y = [1.0, 2.0];
        assert_eq!(
            negative_gradient(Loss::SquaredError, &y, &y),
            vec![0.0, 0.0]
        );
        let h = Loss::Huber { delta: 1.0 };
        assert_eq!(
            negative_gradient(h, &[5.0, -0.3], &[0.0, 0.0]),
            vec![1.0, -0.3]
        );
        let h = Loss::Huber { delta: 1.5 };
        let zeros = [0.0; 5];
        assert_eq!(
            negative_gradient(h, &[-2.0, -1.0, 0.0, 1.0, 2.0], &zeros),
            vec![-1.5, -1.0, 0.0, 1.0, 1.5]
        );
    }

    #[test]
    fn constant_targets_predict_constant() {
        let (x, _) = toy(20);
        for loss in [Loss::SquaredError, Loss::Huber { delta: 1.0 }] {
            let cfg = GbmConfig {
                loss,
                n_iterations: 1,
                max_depth: 5,
                ..GbmConfig::default()
            };
            let m = gbm_fit(&x, &vec![2.5; 20], &cfg).unwrap();
            assert!(m.predict(&x).unwrap().iter().all(|&p| p == 2.5));
        }
    }

    #[test]
    fn empty_model_predicts_base() {
        let (x, y) = toy(10);
        let mut m = gbm_fit(&x, &y, &GbmConfig::default()).unwrap();
        m.trees.clear();
        assert!(m
            .predict(&x)
            .unwrap()
            .iter()
            .all(|&p| p == m.base_prediction));
    }

    #[test]
    fn single_stump_reproduces_two_points() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let cfg = GbmConfig {
            learning_rate: 1.0,
            n_iterations: 1,
            max_depth: 1,
            ..GbmConfig::default()
        };
        let m = gbm_fit(&x, &[0.0, 10.0], &cfg).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![0.0, 10.0]);
    }

    #[test]
    fn huber_base_is_median() {
        let (x, _) = toy(5);
        let cfg = GbmConfig {
            loss: Loss::Huber { delta: 1.0 },
            n_iterations: 1,
            ..GbmConfig::default()
        };
        let m = gbm_fit(&x, &[0.0, 1.0, 100.0, 2.0, 3.0], &cfg).unwrap();
        assert_eq!(m.base_prediction, 2.0);
    }

    #[test]
    fn training_mse_never_increases() {
        let (x, y) = toy(80);
        for lr in [0.05, 0.5, 1.0] {
            let cfg = GbmConfig {
                learning_rate: lr,
                n_iterations: 60,
                max_depth: 3,
                ..GbmConfig::default()
            };
            let m = gbm_fit(&x, &y, &cfg).unwrap();
            let mse = |k| {
                let p = m.predict_partial(&x, k).unwrap();
                p.iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            };
            let mut prev = mse(0);
            for k in 1..=60 {
                let cur = mse(k);
                assert!(cur <= prev, "lr={lr} iteration {k}");
                prev = cur;
            }
        }
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let (x, y) = toy(100);
        let cfg = GbmConfig {
            subsample: 0.6,
            seed: 17,
            split: SplitMode::Histogram { n_bins: 8 },
            ..GbmConfig::default()
        };
        let a = gbm_fit(&x, &y, &cfg).unwrap();
        let b = gbm_fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let other = gbm_fit(&x, &y, &GbmConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(a.predict(&x).unwrap(), other.predict(&x).unwrap());
    }

    #[test]
    fn row_order_does_not_matter_without_subsampling() {
        let (x, y) = toy(60);
        let perm: Vec<usize> = (0..60).map(|i| (i * 37) % 60).collect();
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let cfg = GbmConfig {
            n_iterations: 40,
            max_depth: 3,
            ..GbmConfig::default()
        };
        let a = gbm_fit(&x, &y, &cfg).unwrap().predict(&x).unwrap();
        let b = gbm_fit(&xp, &yp, &cfg).unwrap().predict(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_checks_width_and_fit_checks_input() {
        let (x, y) = toy(10);
        let m = gbm_fit(&x, &y, &GbmConfig::default()).unwrap();
        assert!(matches!(
            m.predict(&Matrix::zeros(2, 2)),
            Err(Error::Shape { .. })
        ));
        let one = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(
            gbm_fit(&one, &[1.0], &GbmConfig::default()),
            Err(Error::Data(_))
        ));
        let bad = GbmConfig {
            learning_rate: 0.0,
            ..GbmConfig::default()
        };
        assert!(matches!(gbm_fit(&x, &y, &bad), Err(Error::Config { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let (x, y) = toy(50);
        let x32 =
            Matrix::from_vec(50, 3, x.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
        let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
        let m = gbm_fit(&x32, &y32, &GbmConfig::default()).unwrap();
        let p = m.predict(&x32).unwrap();
        let mse: f32 = p
            .iter()
            .zip(&y32)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f32>()
            / 50.0;
        assert!(mse < 0.1, "{mse}");
    }
}
