//! Bayesian linear meta-estimator with a data-driven Gaussian prior.
//!
//! The prior over weights is centred on the (ridge-stabilised) least-squares solution
//! `(XᵀX + λI)⁻¹XᵀY` with covariance `σ̂²(XᵀX + λI)⁻¹`; the posterior is the standard
//! normal–normal conjugate update with known noise variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// Lower bound on the estimated noise variance.
pub const NOISE_VAR_FLOOR: f64 = 1e-12;

pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpnasPrior<T> {
    pub mu0: Vec<T>,
    pub sigma0: Matrix<T>,
    pub noise_var: T,
    pub ridge: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpnasModel<T> {
    pub mu: Vec<T>,
    pub sigma: Matrix<T>,
    pub noise_var: T,
    pub ridge: T,
    /// When set, a trailing constant-1 column is appended to inputs before prediction and
    /// the last entry of `mu` is the intercept.
    pub intercept: bool,
}

fn check_rows<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape {
            context: "gpnas targets",
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "non-finite value in meta-estimator input".into(),
        ));
    }
    Ok(())
}

pub fn prior_from_data<T: Scalar>(x: &Matrix<T>, y: &[T], ridge: T) -> Result<GpnasPrior<T>> {
    check_rows(x, y)?;
    if !(ridge >= T::zero() && ridge.is_finite()) {
        return Err(Error::config("ridge", "must be finite and non-negative"));
    }
    let (n, d) = (x.rows(), x.cols());
    if d == 0 {
        return Err(Error::Data(
            "meta-estimator needs at least one column".into(),
        ));
    }
    if ridge == T::zero() && n < d {
        return Err(Error::Singular {
            hint: "; fewer rows than columns, use a positive ridge",
        });
    }
    let mut a = x.gram();
    a.add_diagonal(ridge);
    let chol = a.cholesky().map_err(|_| Error::Singular {
        hint: "; use a positive ridge",
    })?;
    let mu0 = chol.solve(&x.t_matvec(y)?);
    let rss: T = x
        .row_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let e = yi - dot(r, &mu0);
            e * e
        })
        .sum();
    let dof = n.saturating_sub(d).max(1);
    let noise_var = (rss / T::from_count(dof)).max(T::lit(NOISE_VAR_FLOOR));
    let sigma0 = chol.inverse().scale(noise_var);
    Ok(GpnasPrior {
        mu0,
        sigma0,
        noise_var,
        ridge,
    })
}

pub fn posterior_update<T: Scalar>(
    prior: &GpnasPrior<T>,
    x: &Matrix<T>,
    y: &[T],
) -> Result<GpnasModel<T>> {
    check_rows(x, y)?;
    let d = prior.mu0.len();
    if prior.sigma0.rows() != d || prior.sigma0.cols() != d {
        return Err(Error::Shape {
            context: "prior covariance",
            expected: d,
            got: prior.sigma0.rows(),
        });
    }
    if x.rows() > 0 && x.cols() != d {
        return Err(Error::Shape {
            context: "gpnas design",
            expected: d,
            got: x.cols(),
        });
    }
    if !(prior.noise_var > T::zero()) {
        return Err(Error::Domain("noise variance must be positive".into()));
    }
    let prec0 = prior.sigma0.cholesky()?.inverse();
    if x.rows() == 0 {
        return Ok(GpnasModel {
            mu: prior.mu0.clone(),
            sigma: prior.sigma0.clone(),
            noise_var: prior.noise_var,
            ridge: prior.ridge,
            intercept: false,
        });
    }
    let inv_noise = T::one() / prior.noise_var;
    let precision = prec0.add(&x.gram().scale(inv_noise))?;
    let chol = precision.cholesky()?;
    let rhs: Vec<T> = prec0
        .matvec(&prior.mu0)?
        .into_iter()
        .zip(x.t_matvec(y)?)
        .map(|(a, b)| a + b * inv_noise)
        .collect();
    Ok(GpnasModel {
        mu: chol.solve(&rhs),
        sigma: chol.inverse(),
        noise_var: prior.noise_var,
        ridge: prior.ridge,
        intercept: false,
    })
}

/// Empirical-Bayes fit on meta-features: append an intercept column, derive the prior from
/// the data, then update on the same data.
pub fn fit_meta<T: Scalar>(meta: &Matrix<T>, y: &[T], ridge: T) -> Result<GpnasModel<T>> {
    let design = meta.with_intercept();
    let prior = prior_from_data(&design, y, ridge)?;
    let mut model = posterior_update(&prior, &design, y)?;
    model.intercept = true;
    Ok(model)
}

impl<T: Scalar> GpnasModel<T> {
    /// Input width expected by [`predict_mean`](Self::predict_mean), excluding the intercept.
    pub fn input_width(&self) -> usize {
        self.mu.len() - usize::from(self.intercept)
    }

    fn design(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape {
                context: "gpnas predict",
                expected: self.input_width(),
                got: x.cols(),
            });
        }
        Ok(if self.intercept {
            x.with_intercept()
        } else {
            x.clone()
        })
    }

    pub fn predict_mean(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        let design = self.design(x)?;
        Ok(design.row_iter().map(|r| dot(r, &self.mu)).collect())
    }

    /// `diag(X Σ Xᵀ) + σ²`.
    pub fn predict_variance(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        let design = self.design(x)?;
        Ok(design
            .row_iter()
            .map(|r| {
                let sr = self.sigma.matvec(r).expect("width checked");
                dot(r, &sr) + self.noise_var
            })
            .collect())
    }

    /// Uses this posterior as the prior for a further update.
    pub fn as_prior(&self) -> GpnasPrior<T> {
        GpnasPrior {
            mu0: self.mu.clone(),
            sigma0: self.sigma.clone(),
            noise_var: self.noise_var,
            ridge: self.ridge,
        }
    }

    /// Weights on the input columns, without the intercept.
    pub fn weights(&self) -> &[T] {
        &self.mu[..self.input_width()]
    }

    pub fn intercept_value(&self) -> T {
        if self.intercept {
            *self.mu.last().expect("non-empty")
        } else {
            T::zero()
        }
    }
}
