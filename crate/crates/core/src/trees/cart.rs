//! The shared CART grower.
//!
//! Split criterion is the regularized score difference
//!   gain = s(L) + s(R) - s(parent),  s(S) = (sum r)^2 / (|S| + l2)
//! which for l2 = 0 equals the weighted variance reduction. Leaves
//! predict (sum r) / (|S| + l2), the node mean when l2 = 0.
//!
//! Sums inside a node run over values sorted by (feature value, target),
//! and leaf sums over sorted targets, so a fitted tree is a function of
//! the sample multiset only: permuting row order cannot change it.

use super::{SplitMode, TreeParams};
use crate::matrix::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat binary tree; node 0 is the root. Samples with
/// value <= threshold go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    l2: f64,
    nodes: Vec<Node>,
    /// summed split gain per feature
    gains: Vec<f64>,
}

#[inline]
fn score(sum: f64, count: usize, l2: f64) -> f64 {
    sum * sum / (count as f64 + l2)
}

/// Sum in ascending value order, independent of input order.
fn sorted_sum(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.iter().sum()
}

impl<'a> Grower<'a> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let mut vals: Vec<f64> = idx.iter().map(|&i| self.y[i]).collect();
        let sum = sorted_sum(&mut vals);
        sum / (idx.len() as f64 + self.l2)
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == first)
    }

    /// Best (gain, threshold) for one feature under exact-best scanning,
    /// or None when the feature is constant inside the node.
    fn best_exact_split(&self, feature: usize, idx: &[usize]) -> Option<(f64, f64)> {
        let col = &self.cols[feature];
        let mut pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (col[i], self.y[i])).collect();
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pairs.len();
        if pairs[0].0 == pairs[n - 1].0 {
            return None;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let parent = score(total, n, self.l2);

        let mut best: Option<(f64, f64)> = None;
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += pairs[k - 1].1;
            let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
            if lo == hi {
                continue;
            }
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                // adjacent representable values; no midpoint exists
                continue;
            }
            let gain =
                score(left_sum, k, self.l2) + score(total - left_sum, n - k, self.l2) - parent;
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, mid));
            }
        }
        best
    }

    /// One uniform threshold in [min, max) for one feature.
    fn random_split(
        &self,
        feature: usize,
        idx: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(f64, f64)> {
        let col = &self.cols[feature];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in idx {
            lo = lo.min(col[i]);
            hi = hi.max(col[i]);
        }
        if lo == hi {
            return None;
        }
        let threshold = rng.gen_range(lo..hi);
        let mut left: Vec<f64> = Vec::new();
        let mut right: Vec<f64> = Vec::new();
        for &i in idx {
            if col[i] <= threshold {
                left.push(self.y[i]);
            } else {
                right.push(self.y[i]);
            }
        }
        if left.is_empty() || right.is_empty() {
            return None;
        }
        let ls = sorted_sum(&mut left);
        let rs = sorted_sum(&mut right);
        let parent = score(ls + rs, idx.len(), self.l2);
        let gain =
            score(ls, left.len(), self.l2) + score(rs, right.len(), self.l2) - parent;
        Some((gain, threshold))
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let p = self.cols.len();
        let k = self.params.max_features.count(p);
        if k == p {
            return (0..p).collect();
        }
        let mut chosen = rand::seq::index::sample(rng, p, k).into_vec();
        // canonical scan order so equal gains break to the lowest feature
        chosen.sort_unstable();
        chosen
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let make_leaf = idx.len() < self.params.min_samples_split
            || depth >= self.params.max_depth
            || self.is_pure(&idx);
        if !make_leaf {
            if let Some((feature, threshold, gain)) = self.find_split(&idx, rng) {
                let (mut li, mut ri) = (Vec::new(), Vec::new());
                let col = &self.cols[feature];
                for &i in &idx {
                    if col[i] <= threshold {
                        li.push(i);
                    } else {
                        ri.push(i);
                    }
                }
                debug_assert!(!li.is_empty() && !ri.is_empty());
                self.gains[feature] += gain;
                let at = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let left = self.grow(li, depth + 1, rng);
                let right = self.grow(ri, depth + 1, rng);
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut self.nodes[at]
                {
                    *l = left;
                    *r = right;
                }
                return at;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        at
    }

    fn find_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64, f64)> {
        let features = self.candidate_features(rng);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in features {
            let cand = match self.params.split_mode {
                SplitMode::ExactBest => self.best_exact_split(f, idx),
                SplitMode::RandomThreshold => self.random_split(f, idx, rng),
            };
            if let Some((gain, threshold)) = cand {
                if gain > 0.0 && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }
}

/// Grow one CART tree on the rows listed in `idx` (with repetitions for
/// bootstrap resamples). Returns the tree and its per-feature summed
/// split gains.
pub(crate) fn fit_cart_on_indices(
    cols: &[Vec<f64>],
    y: &[f64],
    idx: Vec<usize>,
    params: TreeParams,
    l2: f64,
    rng: &mut ChaCha8Rng,
) -> (Tree, Vec<f64>) {
    debug_assert!(!idx.is_empty());
    let mut grower = Grower {
        cols,
        y,
        params,
        l2,
        nodes: Vec::new(),
        gains: vec![0.0; cols.len()],
    };
    grower.grow(idx, 0, rng);
    (
        Tree {
            nodes: grower.nodes,
        },
        grower.gains,
    )
}

/// Grow a single CART regression tree on the full dataset.
pub fn fit_cart(x: &Matrix, y: &[f64], params: TreeParams, rng: &mut ChaCha8Rng) -> Tree {
    let cols = super::to_columns(x);
    let idx: Vec<usize> = (0..x.rows()).collect();
    fit_cart_on_indices(&cols, y, idx, params, 0.0, rng).0
}
