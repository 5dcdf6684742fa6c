//! Logit transform between integer rank labels and an unbounded latent scale.
//!
//! A rank `y` among `n` candidates maps to `z = ln((y + 1) / (n - y))`. Uniformly spread
//! ranks become a symmetric bell-shaped target, which suits squared-error learners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How latent predictions are mapped back onto the rank scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackTransform {
    /// Algebraic inverse of the forward transform: `(n + 1)·σ(z) − 1`.
    #[default]
    Exact,
    /// Plain scaled sigmoid `(n − 1)·σ(z)`. Order-equivalent to `Exact` but not its inverse.
    Paper,
}

impl std::fmt::Display for BackTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackTransform::Exact => "exact",
            BackTransform::Paper => "paper",
        })
    }
}

impl std::str::FromStr for BackTransform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BackTransform::Exact),
            "paper" => Ok(BackTransform::Paper),
            other => Err(Error::config(
                "back_transform",
                format!("expected `exact` or `paper`, got `{other}`"),
            )),
        }
    }
}

fn check_population(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("population size {n} is below 2")));
    }
    Ok(())
}

pub fn rank_to_latent<T: Scalar>(y: usize, n: usize) -> Result<T> {
    check_population(n)?;
    if y >= n {
        return Err(Error::Domain(format!("rank {y} outside [0, {}]", n - 1)));
    }
    let num = T::from_count(y + 1);
    let den = T::from_count(n - y);
    Ok((num / den).ln())
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    // Split by sign so exp never overflows.
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `(n − 1) / (1 + e^{−z})`, in `(0, n − 1)`.
pub fn latent_to_score_scaled<T: Scalar>(z: T, n: usize) -> T {
    T::from_count(n.saturating_sub(1)) * sigmoid(z)
}

/// `(n + 1)·σ(z) − 1`, the exact inverse of [`rank_to_latent`] on the continuum.
pub fn latent_to_score_exact<T: Scalar>(z: T, n: usize) -> T {
    T::from_count(n + 1) * sigmoid(z) - T::one()
}

pub fn latent_to_score<T: Scalar>(z: T, n: usize, variant: BackTransform) -> T {
    match variant {
        BackTransform::Exact => latent_to_score_exact(z, n),
        BackTransform::Paper => latent_to_score_scaled(z, n),
    }
}

/// Rounds half away from zero, then clamps into `[0, n − 1]`.
pub fn latent_to_rank<T: Scalar>(z: T, n: usize, variant: BackTransform) -> usize {
    let s = latent_to_score(z, n, variant).round();
    let hi = n.saturating_sub(1);
    if !(s > T::zero()) {
        return 0;
    }
    s.to_usize().map_or(hi, |r| r.min(hi))
}

/// Latent targets for a full label vector; `n` is the label population size.
pub fn ranks_to_latents<T: Scalar>(ranks: &[usize], n: usize) -> Result<Vec<T>> {
    ranks.iter().map(|&y| rank_to_latent(y, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        assert_eq!(rank_to_latent::<f64>(1, 3).unwrap(), 0.0);
        // ln(1/500) and ln(250/251); reference values from an independent mpmath evaluation.
        let z0: f64 = rank_to_latent(0, 500).unwrap();
        assert!((z0 - (-6.214_608_098_422_191)).abs() < 1e-12);
        let zmid: f64 = rank_to_latent(249, 500).unwrap();
        assert!((zmid - (-0.003_992_021_269_537_453)).abs() < 1e-15);
    }

    #[test]
    fn forward_domain_errors() {
        assert!(matches!(
            rank_to_latent::<f64>(500, 500),
            Err(Error::Domain(_))
        ));
        assert!(matches!(rank_to_latent::<f64>(0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn scaled_sigmoid_examples() {
        assert_eq!(latent_to_score_scaled(0.0f64, 500), 249.5);
        assert!((latent_to_score_scaled(1e3f64, 500) - 499.0).abs() < 1e-9);
        let z: f64 = rank_to_latent(249, 500).unwrap();
        let expect = 499.0 * 250.0 / 501.0;
        assert!((latent_to_score_scaled(z, 500) - expect).abs() < 1e-10);
        assert!((expect - 249.0019).abs() < 1e-4);
    }

    #[test]
    fn back_transform_examples() {
        for n in [2usize, 3, 10, 500] {
            for y in 0..n {
                let z: f64 = rank_to_latent(y, n).unwrap();
                assert_eq!(latent_to_rank(z, n, BackTransform::Exact), y, "n={n} y={y}");
            }
        }
        // (n + 1)/2 - 1 = 249.5 rounds away from zero.
        assert_eq!(latent_to_rank(0.0f64, 500, BackTransform::Exact), 250);
        assert_eq!(latent_to_rank(-1e6f64, 10, BackTransform::Exact), 0);
        assert_eq!(latent_to_rank(1e6f64, 10, BackTransform::Exact), 9);
        assert_eq!(latent_to_rank(f64::NAN, 10, BackTransform::Exact), 0);
    }

    #[test]
    fn scaled_sigmoid_shifts_the_top_rank() {
        let n = 500;
        let z: f64 = rank_to_latent(n - 1, n).unwrap();
        assert_eq!(latent_to_rank(z, n, BackTransform::Paper), n - 2);
        assert_eq!(latent_to_rank(z, n, BackTransform::Exact), n - 1);
    }

    #[test]
    fn forward_is_strictly_increasing() {
        for n in 2..=1000usize {
            let zs: Vec<f64> = (0..n).map(|y| rank_to_latent(y, n).unwrap()).collect();
            assert!(zs.windows(2).all(|w| w[0] < w[1]), "n={n}");
        }
    }

    #[test]
    fn round_trip_up_to_1000() {
        for n in 2..=1000usize {
            for y in 0..n {
                let z: f64 = rank_to_latent(y, n).unwrap();
                assert_eq!(latent_to_rank(z, n, BackTransform::Exact), y);
            }
        }
    }

    #[test]
    fn f32_round_trip_at_challenge_train_size() {
        for y in 0..500 {
            let z: f32 = rank_to_latent(y, 500).unwrap();
            assert_eq!(latent_to_rank(z, 500, BackTransform::Exact), y);
        }
    }

    #[test]
    fn transformed_permutation_is_symmetric() {
        for n in [2usize, 7, 500, 501] {
            let z: Vec<f64> = ranks_to_latents(&(0..n).collect::<Vec<_>>(), n).unwrap();
            let nf = n as f64;
            let mean = z.iter().sum::<f64>() / nf;
            let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
            let m3 = z.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
            let skew = m3 / m2.powf(1.5);
            assert!(skew.abs() < 1e-9, "n={n} skew={skew}");
        }
    }
}
