//! CART regression trees grown greedily on squared-error reduction.

use serde::{Deserialize, Serialize};

use super::{GbmConfig, SplitMode};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Reduction in the sum of squared deviations achieved by this split.
        gain: T,
    },
    Leaf {
        value: T,
        n_samples: usize,
    },
}

/// Flattened binary tree, root at index 0. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(value: T, n_samples: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value, n_samples }],
        }
    }

    /// Index of the leaf a row routes to.
    pub fn leaf_index(&self, row: &[T]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<SplitChoice<T>> {
        match &self.nodes[0] {
            Node::Split {
                feature,
                threshold,
                gain,
                ..
            } => Some(SplitChoice {
                feature: *feature,
                threshold: *threshold,
                gain: *gain,
            }),
            Node::Leaf { .. } => None,
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, T, usize)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Leaf { value, n_samples } => Some((i, *value, *n_samples)),
            Node::Split { .. } => None,
        })
    }
}

/// Best split at a node. `gain` is the reduction in the sum of squared deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

/// `nL·nR/n · (meanL − meanR)²`, which equals `SSE(parent) − SSE(left) − SSE(right)`.
#[inline]
fn split_gain<T: Scalar>(sum_l: T, n_l: usize, sum_r: T, n_r: usize) -> T {
    let nl = T::from_count(n_l);
    let nr = T::from_count(n_r);
    let diff = sum_l / nl - sum_r / nr;
    nl * nr / (nl + nr) * diff * diff
}

/// Gains within this relative distance count as tied, so summation-order noise cannot
/// override the lowest-feature, lowest-threshold rule.
const GAIN_TIE_RTOL: f64 = 1e-12;

#[inline]
fn beats<T: Scalar>(gain: T, best: Option<T>) -> bool {
    match best {
        None => gain > T::zero(),
        Some(b) => gain > b + b.abs() * T::lit(GAIN_TIE_RTOL),
    }
}

#[inline]
fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let m = a + (b - a) * T::lit(0.5);
    if m >= b {
        a
    } else {
        m
    }
}

enum Index<T> {
    /// Every row, sorted by value, per feature.
    Exact { order: Vec<Vec<u32>> },
    /// Bin id per (feature, row) plus the edges; bin `b` holds values in `(edge[b-1], edge[b]]`.
    Histogram {
        edges: Vec<Vec<T>>,
        bins: Vec<Vec<u16>>,
    },
}

/// Per-matrix preprocessing shared by every tree of one boosting run.
pub struct TreeBuilder<'a, T> {
    x: &'a Matrix<T>,
    index: Index<T>,
}

impl<'a, T: Scalar> TreeBuilder<'a, T> {
    pub fn new(x: &'a Matrix<T>, mode: SplitMode) -> Result<Self> {
        if x.rows() > u32::MAX as usize {
            return Err(Error::Data("too many rows".into()));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        let d = x.cols();
        let index = match mode {
            SplitMode::Exact => {
                let order = (0..d)
                    .map(|f| {
                        let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                        idx.sort_by(|&a, &b| {
                            x[(a as usize, f)]
                                .partial_cmp(&x[(b as usize, f)])
                                .expect("finite")
                                .then(a.cmp(&b))
                        });
                        idx
                    })
                    .collect();
                Index::Exact { order }
            }
            SplitMode::Histogram { n_bins } => {
                let mut edges = Vec::with_capacity(d);
                let mut bins = Vec::with_capacity(d);
                for f in 0..d {
                    let col = x.column(f);
                    let e = equal_frequency_edges(&col, n_bins);
                    bins.push(
                        col.iter()
                            .map(|&v| e.partition_point(|&edge| edge < v) as u16)
                            .collect(),
                    );
                    edges.push(e);
                }
                Index::Histogram { edges, bins }
            }
        };
        Ok(TreeBuilder { x, index })
    }

    /// Candidate thresholds of a histogram builder, per feature.
    pub fn bin_edges(&self) -> Option<&[Vec<T>]> {
        match &self.index {
            Index::Histogram { edges, .. } => Some(edges),
            Index::Exact { .. } => None,
        }
    }

    pub fn fit(&self, targets: &[T], rows: &[usize], cfg: &GbmConfig) -> Result<RegressionTree<T>> {
        if targets.len() != self.x.rows() {
            return Err(Error::Shape {
                context: "tree targets",
                expected: self.x.rows(),
                got: targets.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::Data("empty row subset".into()));
        }
        let mut member = vec![false; self.x.rows()];
        for &r in rows {
            if r >= self.x.rows() {
                return Err(Error::Data(format!("row {r} out of range")));
            }
            if std::mem::replace(&mut member[r], true) {
                return Err(Error::Data(format!("row {r} listed twice")));
            }
            if !targets[r].is_finite() {
                return Err(Error::Data(format!("non-finite target at row {r}")));
            }
        }

        let mut grower = Grower {
            x: self.x,
            targets,
            cfg,
            nodes: Vec::new(),
            go_left: vec![false; self.x.rows()],
        };
        match &self.index {
            Index::Exact { order } => {
                let lists: Vec<Vec<u32>> = order
                    .iter()
                    .map(|o| o.iter().copied().filter(|&r| member[r as usize]).collect())
                    .collect();
                grower.grow_exact(lists, 0);
            }
            Index::Histogram { edges, bins } => {
                let node_rows: Vec<u32> = (0..self.x.rows() as u32)
                    .filter(|&r| member[r as usize])
                    .collect();
                grower.grow_hist(edges, bins, node_rows, 0);
            }
        }
        Ok(RegressionTree {
            nodes: grower.nodes,
        })
    }
}

/// Fits one tree on `rows` of `x` against `targets`.
pub fn fit_tree<T: Scalar>(
    x: &Matrix<T>,
    targets: &[T],
    rows: &[usize],
    cfg: &GbmConfig,
) -> Result<RegressionTree<T>> {
    cfg.validate()?;
    TreeBuilder::new(x, cfg.split)?.fit(targets, rows, cfg)
}

/// Up to `n_bins − 1` cut points at equal-frequency positions, each the midpoint between two
/// distinct neighbouring values so no training value sits on an edge.
pub fn equal_frequency_edges<T: Scalar>(values: &[T], n_bins: usize) -> Vec<T> {
    let mut sorted: Vec<T> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let mut edges: Vec<T> = Vec::new();
    if n < 2 || n_bins < 2 {
        return edges;
    }
    for k in 1..n_bins {
        let pos = (k * n) / n_bins;
        if pos == 0 || pos >= n {
            continue;
        }
        // first index at or after `pos` whose value differs from its predecessor
        let mut i = pos;
        while i < n && sorted[i] == sorted[i - 1] {
            i += 1;
        }
        if i >= n {
            continue;
        }
        let e = midpoint(sorted[i - 1], sorted[i]);
        if edges.last().map_or(true, |&last| e > last) {
            edges.push(e);
        }
    }
    edges
}

struct Grower<'a, T> {
    x: &'a Matrix<T>,
    targets: &'a [T],
    cfg: &'a GbmConfig,
    nodes: Vec<Node<T>>,
    go_left: Vec<bool>,
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn leaf_stats(&self, rows: &[u32]) -> (T, bool) {
        let first = self.targets[rows[0] as usize];
        let mut sum = T::zero();
        let mut constant = true;
        for &r in rows {
            let t = self.targets[r as usize];
            constant &= t == first;
            sum = sum + t;
        }
        (sum, constant)
    }

    fn can_split(&self, n: usize, depth: usize, constant: bool) -> bool {
        depth < self.cfg.max_depth && n >= 2 * self.cfg.min_samples_leaf && !constant
    }

    fn push_leaf(&mut self, sum: T, n: usize) -> usize {
        self.nodes.push(Node::Leaf {
            value: sum / T::from_count(n),
            n_samples: n,
        });
        self.nodes.len() - 1
    }

    fn best_exact(&self, lists: &[Vec<u32>], total: T) -> Option<SplitChoice<T>> {
        let n = lists[0].len();
        let msl = self.cfg.min_samples_leaf;
        let mut best: Option<SplitChoice<T>> = None;
        for (f, list) in lists.iter().enumerate() {
            let mut sum_l = T::zero();
            for i in 0..n - 1 {
                let r = list[i] as usize;
                sum_l = sum_l + self.targets[r];
                let n_l = i + 1;
                let n_r = n - n_l;
                if n_l < msl || n_r < msl {
                    continue;
                }
                let a = self.x[(r, f)];
                let b = self.x[(list[i + 1] as usize, f)];
                if a == b {
                    continue;
                }
                let gain = split_gain(sum_l, n_l, total - sum_l, n_r);
                if beats(gain, best.map(|s| s.gain)) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: midpoint(a, b),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow_exact(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let n = lists[0].len();
        let (sum, constant) = self.leaf_stats(&lists[0]);
        if !self.can_split(n, depth, constant) {
            return self.push_leaf(sum, n);
        }
        let Some(choice) = self.best_exact(&lists, sum) else {
            return self.push_leaf(sum, n);
        };
        for &r in &lists[0] {
            let r = r as usize;
            self.go_left[r] = self.x[(r, choice.feature)] <= choice.threshold;
        }
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = lists
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| self.go_left[r as usize]))
            .unzip();
        self.push_split(
            choice,
            n,
            depth,
            |g, d| g.grow_exact(left, d),
            |g, d| g.grow_exact(right, d),
        )
    }

    fn push_split(
        &mut self,
        choice: SplitChoice<T>,
        n: usize,
        depth: usize,
        grow_left: impl FnOnce(&mut Self, usize) -> usize,
        grow_right: impl FnOnce(&mut Self, usize) -> usize,
    ) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: T::zero(),
            n_samples: n,
        });
        let left = grow_left(self, depth + 1);
        let right = grow_right(self, depth + 1);
        self.nodes[at] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
            n_samples: n,
            gain: choice.gain,
        };
        at
    }

    fn grow_hist(
        &mut self,
        edges: &[Vec<T>],
        bins: &[Vec<u16>],
        rows: Vec<u32>,
        depth: usize,
    ) -> usize {
        let n = rows.len();
        let (sum, constant) = self.leaf_stats(&rows);
        if !self.can_split(n, depth, constant) {
            return self.push_leaf(sum, n);
        }
        let msl = self.cfg.min_samples_leaf;
        let mut best: Option<(SplitChoice<T>, usize)> = None;
        let mut hist_sum: Vec<T> = Vec::new();
        let mut hist_cnt: Vec<usize> = Vec::new();
        for (f, fe) in edges.iter().enumerate() {
            if fe.is_empty() {
                continue;
            }
            hist_sum.clear();
            hist_sum.resize(fe.len() + 1, T::zero());
            hist_cnt.clear();
            hist_cnt.resize(fe.len() + 1, 0);
            for &r in &rows {
                let b = bins[f][r as usize] as usize;
                hist_sum[b] = hist_sum[b] + self.targets[r as usize];
                hist_cnt[b] += 1;
            }
            let mut sum_l = T::zero();
            let mut n_l = 0;
            for (b, &edge) in fe.iter().enumerate() {
                sum_l = sum_l + hist_sum[b];
                n_l += hist_cnt[b];
                let n_r = n - n_l;
                if n_l < msl || n_r < msl || n_l == 0 || n_r == 0 {
                    continue;
                }
                let gain = split_gain(sum_l, n_l, sum - sum_l, n_r);
                if beats(gain, best.map(|(s, _)| s.gain)) {
                    best = Some((
                        SplitChoice {
                            feature: f,
                            threshold: edge,
                            gain,
                        },
                        b,
                    ));
                }
            }
        }
        let Some((choice, bin)) = best else {
            return self.push_leaf(sum, n);
        };
        let (left, right): (Vec<u32>, Vec<u32>) = rows
            .into_iter()
            .partition(|&r| bins[choice.feature][r as usize] as usize <= bin);
        self.push_split(
            choice,
            n,
            depth,
            |g, d| g.grow_hist(edges, bins, left, d),
            |g, d| g.grow_hist(edges, bins, right, d),
        )
    }
}
