//! Boosted regression trees under squared-error loss.
//!
//! Gradient mode fits each round's tree to the current residuals with
//! plain variance-reduction splits. Newton mode adds an L2 penalty on
//! leaf weights: value = (sum r) / (count + l2_leaf) and the regularized
//! score drives the split gain. With squared loss the Hessian is
//! constant, so l2_leaf = 0 makes the two modes the same computation.

use super::cart::{fit_cart_on_indices, Tree};
use super::{
    check_feature_count, normalize_importances, to_columns, MaxFeatures, SplitMode, TreeParams,
};
use crate::error::{Error, Result};
use crate::matrix::{mean, Matrix};
use crate::seed::rng_for;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub l2_leaf: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 1.0,
            l2_leaf: 1.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Contract("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Contract(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Contract(format!(
                "subsample must lie in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.l2_leaf < 0.0 {
            return Err(Error::Contract("l2_leaf must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub trees: Vec<Tree>,
    pub base_prediction: f64,
    pub params: BoostParams,
    pub n_features: usize,
    pub feature_importances: Vec<f64>,
}

impl BoostModel {
    /// base + learning_rate * sum of tree outputs.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_feature_count(self.n_features, x)?;
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                self.base_prediction
                    + self.params.learning_rate
                        * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
            })
            .collect())
    }
}

fn fit_boost(x: &Matrix, y: &[f64], params: BoostParams, l2: f64) -> Result<BoostModel> {
    params.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::Contract("cannot boost on an empty dataset".into()));
    }
    let p = x.cols();
    let cols = to_columns(x);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: 2,
        max_features: MaxFeatures::All,
        split_mode: SplitMode::ExactBest,
    };

    let base = mean(y);
    let mut current = vec![base; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut gains = vec![0.0; p];
    let k = ((params.subsample * n as f64).ceil() as usize).clamp(1, n);

    for round in 0..params.n_estimators {
        let mut rng = rng_for(params.seed, round as u64);
        let idx: Vec<usize> = if k == n {
            (0..n).collect()
        } else {
            let mut draws = rand::seq::index::sample(&mut rng, n, k).into_vec();
            draws.sort_unstable();
            draws
        };
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let (tree, g) = fit_cart_on_indices(&cols, &residuals, idx, tree_params, l2, &mut rng);
        for i in 0..n {
            current[i] += params.learning_rate * tree.predict_row(x.row(i));
        }
        for (acc, v) in gains.iter_mut().zip(g) {
            *acc += v;
        }
        trees.push(tree);
    }
    Ok(BoostModel {
        trees,
        base_prediction: base,
        params,
        n_features: p,
        feature_importances: normalize_importances(gains),
    })
}

/// First-order gradient boosting; any l2_leaf in `params` is ignored and
/// recorded as zero.
pub fn fit_gradient_boosting(x: &Matrix, y: &[f64], params: BoostParams) -> Result<BoostModel> {
    let params = BoostParams {
        l2_leaf: 0.0,
        ..params
    };
    fit_boost(x, y, params, 0.0)
}

/// Second-order boosting with L2 leaf regularization.
pub fn fit_newton_boosting(x: &Matrix, y: &[f64], params: BoostParams) -> Result<BoostModel> {
    fit_boost(x, y, params, params.l2_leaf)
}
