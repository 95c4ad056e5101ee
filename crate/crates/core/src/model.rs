//! Final-model machinery: seeded k-fold assignment, pooled
//! cross-validation, exhaustive grid search and the versioned model file
//! the CLI round-trips through `train` / `evaluate`.

use crate::dataset::SpectralDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{metrics, Metrics};
use crate::seed::{derive_seed, rng_for};
use crate::trees::{fit_gradient_boosting, fit_newton_boosting, BoostModel, BoostParams};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GradientBoosting,
    NewtonBoosting,
}

impl ModelKind {
    pub fn fit(self, x: &Matrix, y: &[f64], params: BoostParams) -> Result<BoostModel> {
        match self {
            ModelKind::GradientBoosting => fit_gradient_boosting(x, y, params),
            ModelKind::NewtonBoosting => fit_newton_boosting(x, y, params),
        }
    }
}

/// Shuffled near-equal fold assignment; the first n % folds folds take
/// one extra sample. Deterministic in (n, folds, seed).
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Contract(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Contract(format!(
            "cannot split {n} samples into {folds} folds"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, 0xF01D);
    indices.shuffle(&mut rng);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(indices[at..at + size].to_vec());
        at += size;
    }
    Ok(out)
}

/// Pooled out-of-fold cross-validation of one boosting configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub metrics: Metrics,
    /// out-of-fold prediction per sample, in dataset order
    pub predictions: Vec<f64>,
}

pub fn kfold_cv(
    ds: &SpectralDataset,
    kind: ModelKind,
    params: BoostParams,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    let n = ds.n_samples();
    let assignment = fold_assignment(n, folds, seed)?;
    let fold_preds: Vec<(usize, Vec<f64>)> = assignment
        .par_iter()
        .enumerate()
        .map(|(f, holdout)| -> Result<(usize, Vec<f64>)> {
            let train: Vec<usize> = (0..n).filter(|i| !holdout.contains(i)).collect();
            let xt = ds.x().select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| ds.y()[i]).collect();
            // per-fold subsampling stream, deterministic in (seed, fold)
            let fold_params = BoostParams {
                seed: derive_seed(seed, 0xB005 + f as u64),
                ..params
            };
            let model = kind.fit(&xt, &yt, fold_params)?;
            let xv = ds.x().select_rows(holdout);
            Ok((f, model.predict(&xv)?))
        })
        .collect::<Result<_>>()?;

    let mut pooled = vec![0.0; n];
    for (f, preds) in fold_preds {
        for (&i, &p) in assignment[f].iter().zip(&preds) {
            pooled[i] = p;
        }
    }
    Ok(CvOutcome {
        metrics: metrics(ds.y(), &pooled)?,
        predictions: pooled,
    })
}

/// Hyperparameter axes; configurations expand as the Cartesian product
/// in axis order (estimators, depth, learning rate, subsample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub subsample: Vec<f64>,
}

impl BoostGrid {
    pub fn newton_default() -> Self {
        BoostGrid {
            n_estimators: vec![100, 500, 1000],
            max_depth: vec![3, 5, 7, 10],
            learning_rate: vec![0.01, 0.05, 0.1],
            subsample: vec![0.5, 0.7, 1.0],
        }
    }

    pub fn gradient_default() -> Self {
        BoostGrid {
            n_estimators: vec![100, 200],
            max_depth: vec![3, 5],
            learning_rate: vec![0.01, 0.1],
            subsample: vec![0.5, 0.7],
        }
    }

    pub fn len(&self) -> usize {
        self.n_estimators.len() * self.max_depth.len() * self.learning_rate.len()
            * self.subsample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expand in grid order. The tie-break in grid_search relies on this
    /// ordering being stable.
    pub fn configurations(&self, l2_leaf: f64, seed: u64) -> Vec<BoostParams> {
        let mut out = Vec::with_capacity(self.len());
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &learning_rate in &self.learning_rate {
                    for &subsample in &self.subsample {
                        out.push(BoostParams {
                            n_estimators,
                            max_depth,
                            learning_rate,
                            subsample,
                            l2_leaf,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub params: BoostParams,
    pub metrics: Metrics,
}

/// Grid-search outcome: every configuration's pooled CV metrics plus the
/// best configuration (max R^2, earlier grid position on ties).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub kind: ModelKind,
    pub configurations: Vec<ConfigReport>,
    pub best_index: usize,
    pub pooled_predictions: Vec<f64>,
    pub selected_bands_nm: Vec<f64>,
}

impl ModelReport {
    pub fn best(&self) -> &ConfigReport {
        &self.configurations[self.best_index]
    }
}

/// Evaluate every configuration with the same seeded folds and report
/// the best by pooled R^2.
pub fn grid_search(
    ds: &SpectralDataset,
    kind: ModelKind,
    grid: &BoostGrid,
    l2_leaf: f64,
    folds: usize,
    seed: u64,
) -> Result<ModelReport> {
    if grid.is_empty() {
        return Err(Error::Contract("empty hyperparameter grid".into()));
    }
    let configs = grid.configurations(l2_leaf, seed);
    let outcomes: Vec<(ConfigReport, CvOutcome)> = configs
        .par_iter()
        .map(|&params| -> Result<(ConfigReport, CvOutcome)> {
            let cv = kfold_cv(ds, kind, params, folds, seed)?;
            Ok((
                ConfigReport {
                    params,
                    metrics: cv.metrics,
                },
                cv,
            ))
        })
        .collect::<Result<_>>()?;

    let mut best_index = 0;
    for (i, (report, _)) in outcomes.iter().enumerate() {
        if report.metrics.r2 > outcomes[best_index].0.metrics.r2 {
            best_index = i;
        }
    }
    let pooled_predictions = outcomes[best_index].1.predictions.clone();
    Ok(ModelReport {
        kind,
        configurations: outcomes.into_iter().map(|(r, _)| r).collect(),
        best_index,
        pooled_predictions,
        selected_bands_nm: ds.grid().wavelengths().to_vec(),
    })
}

/// Trained model plus enough context to apply it to new spectra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionedModel {
    pub version: u32,
    pub kind: ModelKind,
    pub bands_nm: Vec<f64>,
    pub model: BoostModel,
}

impl VersionedModel {
    pub fn new(kind: ModelKind, bands_nm: Vec<f64>, model: BoostModel) -> Self {
        VersionedModel {
            version: MODEL_FORMAT_VERSION,
            kind,
            bands_nm,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<VersionedModel> {
        let text = std::fs::read_to_string(path)?;
        let model: VersionedModel = serde_json::from_str(&text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Level, SampleMeta, Stage};
    use crate::grid::BandGrid;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn toy_dataset(n: usize, p: usize, seed: u64) -> SpectralDataset {
        let mut rng = crate::seed::rng_for(seed, 50);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 2.0 + r[0] + 0.3 * rng.gen_range(-1.0..1.0))
            .collect();
        let meta = (0..n)
            .map(|i| SampleMeta {
                sample_id: format!("s{i}"),
                cultivar: "synthetic".into(),
                stage: Stage::Bloom,
                season: "2024".into(),
                level: Level::Leaf,
            })
            .collect();
        SpectralDataset::new(
            BandGrid::uniform(400.0, 1000.0, p).unwrap(),
            Matrix::from_rows(rows).unwrap(),
            y,
            meta,
        )
        .unwrap()
    }

    #[test]
    fn folds_partition_the_samples() {
        let folds = fold_assignment(23, 10, 9).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        // deterministic, seed-sensitive
        assert_eq!(folds, fold_assignment(23, 10, 9).unwrap());
        assert_ne!(folds, fold_assignment(23, 10, 10).unwrap());
    }

    #[test]
    fn rejects_more_folds_than_samples() {
        assert!(fold_assignment(5, 10, 0).is_err());
        let ds = toy_dataset(5, 3, 1);
        assert!(kfold_cv(&ds, ModelKind::GradientBoosting, BoostParams::default(), 10, 0).is_err());
    }

    #[test]
    fn mean_predictor_scores_near_zero() {
        let ds = toy_dataset(60, 3, 2);
        let params = BoostParams {
            n_estimators: 0,
            ..BoostParams::default()
        };
        let cv = kfold_cv(&ds, ModelKind::GradientBoosting, params, 10, 3).unwrap();
        assert!(cv.metrics.r2.abs() < 0.25, "r2 = {}", cv.metrics.r2);
        assert!(cv.metrics.r2 <= 0.0, "fold-mean predictor cannot beat the pooled mean");
    }

    #[test]
    fn leaking_the_target_reaches_high_r2() {
        // y duplicated into a feature: boosting memorizes it
        let mut ds = toy_dataset(50, 2, 4);
        let y = ds.y().to_vec();
        let mut rows = Vec::new();
        for i in 0..ds.n_samples() {
            let mut r = ds.x().row(i).to_vec();
            r[0] = y[i];
            rows.push(r);
        }
        ds = ds
            .with_spectra(ds.grid().clone(), Matrix::from_rows(rows).unwrap())
            .unwrap();
        let params = BoostParams {
            n_estimators: 500,
            max_depth: 2,
            learning_rate: 0.1,
            subsample: 1.0,
            l2_leaf: 0.0,
            seed: 0,
        };
        let cv = kfold_cv(&ds, ModelKind::GradientBoosting, params, 10, 5).unwrap();
        assert!(cv.metrics.r2 >= 0.95, "r2 = {}", cv.metrics.r2);
    }

    #[test]
    fn default_grid_sizes_match_the_axes() {
        assert_eq!(BoostGrid::newton_default().len(), 108);
        assert_eq!(BoostGrid::gradient_default().len(), 16);
        assert_eq!(
            BoostGrid::newton_default().configurations(1.0, 0).len(),
            108
        );
    }

    #[test]
    fn single_configuration_grid_wins_by_default() {
        let ds = toy_dataset(30, 3, 6);
        let grid = BoostGrid {
            n_estimators: vec![20],
            max_depth: vec![2],
            learning_rate: vec![0.1],
            subsample: vec![1.0],
        };
        let report = grid_search(&ds, ModelKind::NewtonBoosting, &grid, 1.0, 10, 7).unwrap();
        assert_eq!(report.configurations.len(), 1);
        assert_eq!(report.best_index, 0);
        assert_eq!(report.pooled_predictions.len(), 30);
    }

    #[test]
    fn crippled_learning_rate_loses_to_a_sane_one() {
        let ds = toy_dataset(40, 3, 8);
        let grid = BoostGrid {
            n_estimators: vec![50],
            max_depth: vec![2],
            learning_rate: vec![1e-9, 0.1],
            subsample: vec![1.0],
        };
        let report = grid_search(&ds, ModelKind::GradientBoosting, &grid, 0.0, 10, 9).unwrap();
        assert_abs_diff_eq!(report.best().params.learning_rate, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn best_configuration_is_order_invariant() {
        let ds = toy_dataset(35, 3, 10);
        let grid = BoostGrid {
            n_estimators: vec![10, 40],
            max_depth: vec![1, 3],
            learning_rate: vec![0.05, 0.2],
            subsample: vec![1.0],
        };
        let report = grid_search(&ds, ModelKind::GradientBoosting, &grid, 0.0, 5, 11).unwrap();
        let reversed = BoostGrid {
            n_estimators: vec![40, 10],
            max_depth: vec![3, 1],
            learning_rate: vec![0.2, 0.05],
            subsample: vec![1.0],
        };
        let report2 = grid_search(&ds, ModelKind::GradientBoosting, &reversed, 0.0, 5, 11).unwrap();
        assert_eq!(report.best().params, report2.best().params);
        assert_abs_diff_eq!(
            report.best().metrics.r2,
            report2.best().metrics.r2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_grid_is_rejected() {
        let ds = toy_dataset(20, 2, 12);
        let grid = BoostGrid {
            n_estimators: vec![],
            max_depth: vec![3],
            learning_rate: vec![0.1],
            subsample: vec![1.0],
        };
        assert!(grid_search(&ds, ModelKind::GradientBoosting, &grid, 0.0, 5, 0).is_err());
    }

    #[test]
    fn model_file_round_trips_and_checks_version() {
        let ds = toy_dataset(25, 3, 13);
        let model = ModelKind::NewtonBoosting
            .fit(ds.x(), ds.y(), BoostParams::default())
            .unwrap();
        let vm = VersionedModel::new(
            ModelKind::NewtonBoosting,
            ds.grid().wavelengths().to_vec(),
            model,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        vm.save(&path).unwrap();
        let back = VersionedModel::load(&path).unwrap();
        assert_eq!(vm, back);

        // corrupt the version
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"version\": 1", "\"version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(VersionedModel::load(&path).is_err());
    }
}
