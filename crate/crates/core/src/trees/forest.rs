//! Random forests (bootstrap + exact splits) and extremely randomized
//! trees (full sample + random thresholds), both restricted to a third
//! of the features per split.

use super::cart::{fit_cart_on_indices, Tree};
use super::{
    check_feature_count, normalize_importances, to_columns, MaxFeatures, SplitMode, TreeParams,
};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::seed::rng_for;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub params: TreeParams,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub n_features: usize,
    pub feature_importances: Vec<f64>,
}

impl ForestModel {
    /// Mean over trees; bounded by the training target range.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_feature_count(self.n_features, x)?;
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
                    / self.trees.len() as f64
            })
            .collect())
    }
}

fn fit_forest(
    x: &Matrix,
    y: &[f64],
    n_trees: usize,
    params: TreeParams,
    seed: u64,
    bootstrap: bool,
) -> ForestModel {
    let n = x.rows();
    let p = x.cols();
    let cols = to_columns(x);

    let fitted: Vec<(Tree, Vec<f64>)> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let idx: Vec<usize> = if bootstrap {
                let mut draws: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                draws.sort_unstable();
                draws
            } else {
                (0..n).collect()
            };
            fit_cart_on_indices(&cols, y, idx, params, 0.0, &mut rng)
        })
        .collect();

    let mut gains = vec![0.0; p];
    let mut trees = Vec::with_capacity(n_trees);
    for (tree, g) in fitted {
        for (acc, v) in gains.iter_mut().zip(g) {
            *acc += v;
        }
        trees.push(tree);
    }
    ForestModel {
        trees,
        params,
        n_trees,
        bootstrap,
        seed,
        n_features: p,
        feature_importances: normalize_importances(gains),
    }
}

/// Random forest: bootstrap resamples (n draws with replacement), exact
/// best splits over a third of the features.
pub fn fit_random_forest(
    x: &Matrix,
    y: &[f64],
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Result<ForestModel> {
    params.validate()?;
    let params = TreeParams {
        max_features: MaxFeatures::Third,
        split_mode: SplitMode::ExactBest,
        ..params
    };
    Ok(fit_forest(x, y, n_trees, params, seed, true))
}

/// Extra trees: full sample per tree, one random threshold per candidate
/// feature, a third of the features per split.
pub fn fit_extra_trees(
    x: &Matrix,
    y: &[f64],
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Result<ForestModel> {
    params.validate()?;
    let params = TreeParams {
        max_features: MaxFeatures::Third,
        split_mode: SplitMode::RandomThreshold,
        ..params
    };
    Ok(fit_forest(x, y, n_trees, params, seed, false))
}
