//! Rank-correlation scoring and the multi-output RMSE.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauVariant {
    /// Tie-corrected.
    #[default]
    B,
    /// `(C − D) / (n(n−1)/2)`, no tie correction.
    A,
}

impl std::fmt::Display for TauVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TauVariant::B => "b",
            TauVariant::A => "a",
        })
    }
}

impl std::str::FromStr for TauVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b" => Ok(TauVariant::B),
            "a" => Ok(TauVariant::A),
            other => Err(Error::config(
                "tau",
                format!("expected `a` or `b`, got `{other}`"),
            )),
        }
    }
}

/// Pair statistics behind every Kendall variant. `ties_a` and `ties_b` include pairs tied in
/// both vectors; `ties_both` counts those separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub pairs: u64,
    pub concordant: u64,
    pub discordant: u64,
    pub ties_a: u64,
    pub ties_b: u64,
    pub ties_both: u64,
}

impl PairCounts {
    pub fn tau(&self, variant: TauVariant) -> Result<f64> {
        let s = self.concordant as f64 - self.discordant as f64;
        match variant {
            TauVariant::A => {
                if self.pairs == 0 {
                    return Err(Error::UndefinedMetric("fewer than two observations".into()));
                }
                Ok(s / self.pairs as f64)
            }
            TauVariant::B => {
                let da = self.pairs - self.ties_a;
                let db = self.pairs - self.ties_b;
                if da == 0 || db == 0 {
                    return Err(Error::UndefinedMetric(
                        "one of the vectors is entirely tied".into(),
                    ));
                }
                Ok(s / ((da as f64) * (db as f64)).sqrt())
            }
        }
    }
}

fn check_pair<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "kendall tau",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedMetric("fewer than two observations".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in score vector".into()));
    }
    Ok(())
}

#[inline]
fn cmp<T: Scalar>(x: T, y: T) -> Ordering {
    x.partial_cmp(&y).expect("finite values compare")
}

/// Quadratic pair enumeration.
pub fn pair_counts_naive<T: Scalar>(a: &[T], b: &[T]) -> Result<PairCounts> {
    check_pair(a, b)?;
    let mut c = PairCounts::default();
    let n = a.len();
    for i in 0..n {
        for j in (i + 1)..n {
            c.pairs += 1;
            let da = cmp(a[i], a[j]);
            let db = cmp(b[i], b[j]);
            match (da, db) {
                (Ordering::Equal, Ordering::Equal) => {
                    c.ties_a += 1;
                    c.ties_b += 1;
                    c.ties_both += 1;
                }
                (Ordering::Equal, _) => c.ties_a += 1,
                (_, Ordering::Equal) => c.ties_b += 1,
                (x, y) if x == y => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    Ok(c)
}

/// `O(n log n)` counting: sort by `(a, b)`, then count inversions of `b` with a merge sort.
pub fn pair_counts<T: Scalar>(a: &[T], b: &[T]) -> Result<PairCounts> {
    check_pair(a, b)?;
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| cmp(a[i], a[j]).then_with(|| cmp(b[i], b[j])));

    let tied_pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let mut ties_a = 0u64;
    let mut ties_both = 0u64;
    let mut run_a = 1u64;
    let mut run_ab = 1u64;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if a[i] == a[j] {
            run_a += 1;
            if b[i] == b[j] {
                run_ab += 1;
            } else {
                ties_both += tied_pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += tied_pairs(run_a);
            ties_both += tied_pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += tied_pairs(run_a);
    ties_both += tied_pairs(run_ab);

    let mut seq: Vec<T> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let discordant = merge_count(&mut seq, &mut buf);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run_b += 1;
        } else {
            ties_b += tied_pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += tied_pairs(run_b);

    let pairs = tied_pairs(n as u64);
    let concordant = pairs + ties_both - ties_a - ties_b - discordant;
    Ok(PairCounts {
        pairs,
        concordant,
        discordant,
        ties_a,
        ties_b,
        ties_both,
    })
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count<T: Scalar>(v: &mut [T], buf: &mut [T]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

pub fn kendall_tau<T: Scalar>(a: &[T], b: &[T], variant: TauVariant) -> Result<f64> {
    pair_counts(a, b)?.tau(variant)
}

pub fn kendall_tau_b<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    kendall_tau(a, b, TauVariant::B)
}

/// `sqrt(Σᵢ Σ_d (pred − target)² wᵢ / Σᵢ wᵢ)`.
pub fn multi_rmse<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>, weights: &[T]) -> Result<T> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::Shape {
            context: "multi_rmse",
            expected: target.rows() * target.cols(),
            got: pred.rows() * pred.cols(),
        });
    }
    if weights.len() != pred.rows() {
        return Err(Error::Shape {
            context: "multi_rmse weights",
            expected: pred.rows(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
        return Err(Error::Domain(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Domain("total weight is zero".into()));
    }
    let mut acc = T::zero();
    for ((p, t), &w) in pred.row_iter().zip(target.row_iter()).zip(weights) {
        let sq: T = p.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum();
        acc = acc + sq * w;
    }
    Ok((acc / total).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair<T> {
    pub predicted: Vec<T>,
    pub actual: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: u32,
    pub n: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub variant: TauVariant,
    pub tasks: Vec<TaskScore>,
    pub mean_tau: f64,
}

impl TauReport {
    /// One `task n tau` row per task followed by the mean.
    pub fn to_text(&self) -> String {
        let mut out = String::from("task\tn\ttau\n");
        for t in &self.tasks {
            out.push_str(&format!("{}\t{}\t{:.6}\n", t.task, t.n, t.tau));
        }
        out.push_str(&format!("mean\t-\t{:.6}\n", self.mean_tau));
        out
    }
}

pub fn per_task_report<T: Scalar>(
    tasks: &[(u32, ScorePair<T>)],
    variant: TauVariant,
) -> Result<TauReport> {
    if tasks.is_empty() {
        return Err(Error::Data("no tasks to report".into()));
    }
    let mut scores = tasks
        .iter()
        .map(|(id, pair)| {
            kendall_tau(&pair.predicted, &pair.actual, variant)
                .map(|tau| TaskScore {
                    task: *id,
                    n: pair.predicted.len(),
                    tau,
                })
                .map_err(|e| e.in_task(*id))
        })
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by_key(|s| s.task);
    let mean_tau = scores.iter().map(|s| s.tau).sum::<f64>() / scores.len() as f64;
    Ok(TauReport {
        variant,
        tasks: scores,
        mean_tau,
    })
}
