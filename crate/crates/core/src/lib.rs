//! Small-sample architecture ranking.
//!
//! Encoded sub-network descriptions are mapped to features, rank labels are moved onto a
//! logit scale, a pool of gradient-boosted tree regressors is trained, and their
//! out-of-fold predictions are stacked under a Bayesian linear meta-estimator whose prior
//! is fitted from the data. Predictions are mapped back to integer ranks and scored with
//! Kendall's tau.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix the
//! scalar to `f64`, which is what the command-line tool uses.

pub mod dataset;
pub mod encoding;
pub mod error;
pub mod gbm;
pub mod gpnas;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rank_transform;
pub mod scalar;
pub mod stacking;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type GbmModel = gbm::GbmModel<f64>;
pub type GbmModel32 = gbm::GbmModel<f32>;
pub type RegressionTree = gbm::RegressionTree<f64>;
pub type GpnasPrior = gpnas::GpnasPrior<f64>;
pub type GpnasModel = gpnas::GpnasModel<f64>;
pub type GpnasModel32 = gpnas::GpnasModel<f32>;
pub type Ensemble = stacking::StackEnsemble<f64>;
pub type Ensemble32 = stacking::StackEnsemble<f32>;
