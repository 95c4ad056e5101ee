//! Regression-tree ensembles: CART, random forest, extremely randomized
//! trees, first-order gradient boosting and second-order boosting with
//! L2 leaf regularization.
//!
//! One grower (`cart`) is shared by every ensemble; with `l2_leaf = 0`
//! its split gain reduces to plain variance reduction and its leaf
//! weights to node means, so gradient boosting and Newton boosting with
//! zero regularization are the same computation.
//!
//! All stochastic fits are reproducible: per-tree generators derive from
//! (seed, tree index), so results do not depend on thread schedule.

mod boost;
mod cart;
mod forest;

pub use boost::{fit_gradient_boosting, fit_newton_boosting, BoostModel, BoostParams};
pub use cart::{fit_cart, Tree};
pub use forest::{fit_extra_trees, fit_random_forest, ForestModel};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Third,
    Sqrt,
}

impl MaxFeatures {
    pub fn count(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Third => (p + 2) / 3,
            MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
        }
        .clamp(1, p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Scan midpoints of consecutive sorted unique values.
    ExactBest,
    /// One uniform threshold per candidate feature (extra-trees style).
    RandomThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub split_mode: SplitMode,
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Contract("max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Contract("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 30,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
            split_mode: SplitMode::ExactBest,
        }
    }
}

/// Columns of a sample-major matrix, gathered once per fit so node scans
/// touch contiguous memory.
pub(crate) fn to_columns(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.cols()).map(|j| x.column(j)).collect()
}

pub(crate) fn check_feature_count(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::Shape(format!(
            "model was trained on {expected} features, input has {}",
            x.cols()
        )));
    }
    Ok(())
}

/// Normalize summed split gains to a unit vector; all-zero when no split
/// occurred anywhere.
pub(crate) fn normalize_importances(mut gains: Vec<f64>) -> Vec<f64> {
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        for g in &mut gains {
            *g /= total;
        }
    }
    gains
}
