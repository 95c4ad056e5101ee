//! Ensemble feature selection: repeated 90% resamples, six importance
//! rankers, min-max normalization, rank aggregation, and LOOCV-driven
//! choice of the feature count.
//!
//! Every (iteration, ranker) cell derives its own generator from
//! (master_seed, iteration, ranker kind), so dropping a ranker or adding
//! threads leaves the remaining cells bit-identical.

use crate::dataset::SpectralDataset;
use crate::error::{Error, Result};
use crate::linear::{f_scores, lasso_fit, loocv_mlr, ridge_fit, standardize, LinearFit};
use crate::matrix::{dot, Matrix};
use crate::model::fold_assignment;
use crate::seed::{derive_seed, rng_for};
use crate::selection::{CurvePoint, SelectionMethod, SelectionResult};
use crate::trees::{
    fit_extra_trees, fit_gradient_boosting, fit_random_forest, BoostParams, TreeParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerKind {
    FScore,
    Lasso,
    Ridge,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
}

impl RankerKind {
    pub fn all() -> Vec<RankerKind> {
        vec![
            RankerKind::FScore,
            RankerKind::Lasso,
            RankerKind::Ridge,
            RankerKind::RandomForest,
            RankerKind::ExtraTrees,
            RankerKind::GradientBoosting,
        ]
    }

    /// Stable seed tag, independent of the ranker's position in the
    /// configured list.
    fn seed_tag(self) -> u64 {
        match self {
            RankerKind::FScore => 1,
            RankerKind::Lasso => 2,
            RankerKind::Ridge => 3,
            RankerKind::RandomForest => 4,
            RankerKind::ExtraTrees => 5,
            RankerKind::GradientBoosting => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_iterations: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub rankers: Vec<RankerKind>,
    /// trees per forest-style ranker
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    /// boosting-ranker shape
    pub boost_rounds: usize,
    pub boost_max_depth: usize,
    pub boost_learning_rate: f64,
    /// penalty grid for the lasso/ridge rankers, tuned per cell by CV
    pub lambda_grid: Vec<f64>,
    pub lambda_folds: usize,
    /// abort when more than this fraction of cells fail
    pub max_cell_failure: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_iterations: 50,
            train_fraction: 0.9,
            master_seed: 0,
            rankers: RankerKind::all(),
            forest_trees: 100,
            forest_max_depth: 30,
            boost_rounds: 100,
            boost_max_depth: 3,
            boost_learning_rate: 0.1,
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            lambda_folds: 3,
            max_cell_failure: 0.2,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations < 1 {
            return Err(Error::Contract("n_iterations must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Contract(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.rankers.is_empty() {
            return Err(Error::Contract("no rankers configured".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Contract("empty lambda grid".into()));
        }
        Ok(())
    }
}

/// One successful (iteration, ranker) cell: min-max normalized
/// importances on [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellContribution {
    pub iteration: usize,
    pub ranker: RankerKind,
    pub importances: Vec<f64>,
}

/// Aggregated per-band ranking with full provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// bands sorted by ascending average rank (ties to the lower index)
    pub band_order: Vec<usize>,
    /// average rank per band, indexed by band
    pub avg_rank: Vec<f64>,
    pub contributions: Vec<CellContribution>,
    pub failed_cells: usize,
    pub total_cells: usize,
}

/// Min-max normalize to [0, 1]; a constant vector maps to all zeros.
fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Ranks with 1 = most important; ties share the mean rank.
fn to_ranks(importances: &[f64]) -> Vec<f64> {
    let p = importances.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| importances[b].partial_cmp(&importances[a]).unwrap());
    let mut ranks = vec![0.0; p];
    let mut at = 0;
    while at < p {
        let mut end = at + 1;
        while end < p && importances[order[end]] == importances[order[at]] {
            end += 1;
        }
        // positions at..end hold the same value; mean of ranks at+1..=end
        let mean_rank = (at + 1 + end) as f64 / 2.0;
        for &band in &order[at..end] {
            ranks[band] = mean_rank;
        }
        at = end;
    }
    ranks
}

/// Pick the lambda minimizing pooled CV MSE on the subset, then fit on
/// the whole subset. Shared by the lasso and ridge rankers.
fn penalized_importances(
    z: &Matrix,
    y: &[f64],
    cfg: &EnsembleConfig,
    cell_seed: u64,
    fit: impl Fn(&Matrix, &[f64], f64) -> Result<LinearFit>,
) -> Result<Vec<f64>> {
    let n = z.rows();
    let assignment = fold_assignment(n, cfg.lambda_folds.min(n), cell_seed)?;
    let mut best_lambda = cfg.lambda_grid[0];
    let mut best_mse = f64::INFINITY;
    for &lambda in &cfg.lambda_grid {
        let mut sse = 0.0;
        for holdout in &assignment {
            let train: Vec<usize> = (0..n).filter(|i| !holdout.contains(i)).collect();
            let zt = z.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fitted = fit(&zt, &yt, lambda)?;
            for &i in holdout {
                let pred = fitted.intercept + dot(z.row(i), &fitted.coef);
                sse += (y[i] - pred) * (y[i] - pred);
            }
        }
        let mse = sse / n as f64;
        if mse < best_mse {
            best_mse = mse;
            best_lambda = lambda;
        }
    }
    let fitted = fit(z, y, best_lambda)?;
    Ok(fitted.coef.iter().map(|c| c.abs()).collect())
}

/// Raw (pre-normalization) importances for one cell.
fn cell_importances(
    x: &Matrix,
    y: &[f64],
    ranker: RankerKind,
    cfg: &EnsembleConfig,
    cell_seed: u64,
) -> Result<Vec<f64>> {
    match ranker {
        RankerKind::FScore => f_scores(x, y),
        RankerKind::Lasso => {
            let (z, _) = standardize(x)?;
            penalized_importances(&z, y, cfg, cell_seed, lasso_fit)
        }
        RankerKind::Ridge => {
            let (z, _) = standardize(x)?;
            penalized_importances(&z, y, cfg, cell_seed, ridge_fit)
        }
        RankerKind::RandomForest => {
            let params = TreeParams {
                max_depth: cfg.forest_max_depth,
                ..TreeParams::default()
            };
            Ok(fit_random_forest(x, y, cfg.forest_trees, params, cell_seed)?
                .feature_importances)
        }
        RankerKind::ExtraTrees => {
            let params = TreeParams {
                max_depth: cfg.forest_max_depth,
                ..TreeParams::default()
            };
            Ok(fit_extra_trees(x, y, cfg.forest_trees, params, cell_seed)?.feature_importances)
        }
        RankerKind::GradientBoosting => {
            let params = BoostParams {
                n_estimators: cfg.boost_rounds,
                max_depth: cfg.boost_max_depth,
                learning_rate: cfg.boost_learning_rate,
                subsample: 1.0,
                l2_leaf: 0.0,
                seed: cell_seed,
            };
            Ok(fit_gradient_boosting(x, y, params)?.feature_importances)
        }
    }
}

/// Run the full resample-and-rank procedure. Failed cells are skipped
/// and logged; more than `max_cell_failure` of them aborts the run.
pub fn run_ensemble_ranking(ds: &SpectralDataset, cfg: &EnsembleConfig) -> Result<FeatureRanking> {
    cfg.validate()?;
    let n = ds.n_samples();
    let p = ds.n_bands();
    if n < 10 {
        return Err(Error::Contract(format!(
            "ensemble ranking needs at least 10 samples, got {n}"
        )));
    }
    let subset_size = ((cfg.train_fraction * n as f64).ceil() as usize).clamp(1, n);

    let cells: Vec<(usize, RankerKind, Option<Vec<f64>>)> = (0..cfg.n_iterations)
        .into_par_iter()
        .flat_map_iter(|iteration| {
            let iter_seed = derive_seed(cfg.master_seed, iteration as u64);
            let mut rng = rng_for(iter_seed, 0);
            let mut subset = rand::seq::index::sample(&mut rng, n, subset_size).into_vec();
            subset.sort_unstable();
            let sub_x = ds.x().select_rows(&subset);
            let sub_y: Vec<f64> = subset.iter().map(|&i| ds.y()[i]).collect();
            cfg.rankers.iter().map(move |&ranker| {
                let cell_seed = derive_seed(iter_seed, ranker.seed_tag());
                match cell_importances(&sub_x, &sub_y, ranker, cfg, cell_seed) {
                    Ok(imp) => (iteration, ranker, Some(min_max_normalize(&imp))),
                    Err(e) => {
                        log::warn!("ranker {ranker:?} failed on iteration {iteration}: {e}");
                        (iteration, ranker, None)
                    }
                }
            }).collect::<Vec<_>>()
        })
        .collect();

    let total_cells = cells.len();
    let failed_cells = cells.iter().filter(|(_, _, imp)| imp.is_none()).count();
    if (failed_cells as f64) > cfg.max_cell_failure * total_cells as f64 {
        return Err(Error::EnsembleFailure {
            failed: failed_cells,
            total: total_cells,
        });
    }

    let mut rank_sums = vec![0.0; p];
    let mut contributions = Vec::with_capacity(total_cells - failed_cells);
    for (iteration, ranker, imp) in cells {
        let Some(importances) = imp else { continue };
        for (s, r) in rank_sums.iter_mut().zip(to_ranks(&importances)) {
            *s += r;
        }
        contributions.push(CellContribution {
            iteration,
            ranker,
            importances,
        });
    }
    let ok_cells = (total_cells - failed_cells) as f64;
    let avg_rank: Vec<f64> = rank_sums.iter().map(|s| s / ok_cells).collect();
    let mut band_order: Vec<usize> = (0..p).collect();
    band_order.sort_by(|&a, &b| {
        avg_rank[a]
            .partial_cmp(&avg_rank[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(FeatureRanking {
        band_order,
        avg_rank,
        contributions,
        failed_cells,
        total_cells,
    })
}

/// Walk the ranking, adding one band at a time, and stop at the smallest
/// count whose LOOCV R^2 is within `epsilon` of the best seen anywhere
/// on the curve.
pub fn select_optimal_count(
    ranking: &FeatureRanking,
    ds: &SpectralDataset,
    epsilon: f64,
    m_max: usize,
) -> Result<SelectionResult> {
    let n = ds.n_samples();
    let p = ds.n_bands();
    if ranking.band_order.len() != p {
        return Err(Error::Shape(format!(
            "ranking covers {} bands, dataset has {p}",
            ranking.band_order.len()
        )));
    }
    // loocv_mlr needs n > m + 1; stay a little inside that
    let m_upper = m_max.min(p).min(n.saturating_sub(3));
    if m_upper == 0 {
        return Err(Error::Contract("dataset too small for any feature count".into()));
    }

    let points: Vec<CurvePoint> = (1..=m_upper)
        .into_par_iter()
        .map(|m| {
            let mut bands: Vec<usize> = ranking.band_order[..m].to_vec();
            bands.sort_unstable();
            let sub = ds.x().select_columns(&bands);
            match standardize(&sub).and_then(|(z, _)| loocv_mlr(&z, ds.y())) {
                Ok((rmse, r2)) => CurvePoint {
                    m,
                    rmse: Some(rmse),
                    r2: Some(r2),
                },
                Err(e) => {
                    log::warn!("LOOCV failed at m = {m}: {e}");
                    CurvePoint {
                        m,
                        rmse: None,
                        r2: None,
                    }
                }
            }
        })
        .collect();

    let best_r2 = points
        .iter()
        .filter_map(|pt| pt.r2)
        .fold(f64::NEG_INFINITY, f64::max);
    if best_r2 == f64::NEG_INFINITY {
        return Err(Error::Degenerate("every LOOCV evaluation failed".into()));
    }
    let chosen_m = points
        .iter()
        .find(|pt| pt.r2.is_some_and(|r2| r2 >= best_r2 - epsilon))
        .map(|pt| pt.m)
        .expect("a point attains the maximum");

    let result = SelectionResult {
        method: SelectionMethod::Ensemble,
        grid: ds.grid().clone(),
        selected_bands: ranking.band_order[..chosen_m].to_vec(),
        chosen_m,
        curve: points,
    };
    result.validate()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Level, SampleMeta, Stage};
    use crate::grid::BandGrid;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn as_dataset(x: Matrix, y: Vec<f64>) -> SpectralDataset {
        let n = x.rows();
        let grid = BandGrid::uniform(400.0, 1000.0, x.cols()).unwrap();
        let meta = (0..n)
            .map(|i| SampleMeta {
                sample_id: format!("s{i}"),
                cultivar: "synthetic".into(),
                stage: Stage::Bloom,
                season: "2024".into(),
                level: Level::Leaf,
            })
            .collect();
        SpectralDataset::new(grid, x, y, meta).unwrap()
    }

    fn planted_dataset(n: usize, p: usize, planted: usize, seed: u64) -> SpectralDataset {
        let mut rng = crate::seed::rng_for(seed, 70);
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(1.5..3.5)).collect();
        for (row, &target) in rows.iter_mut().zip(&y) {
            row[planted] = target; // perfect predictor band
        }
        as_dataset(Matrix::from_rows(rows).unwrap(), y)
    }

    fn small_cfg(seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_iterations: 8,
            master_seed: seed,
            forest_trees: 25,
            boost_rounds: 30,
            ..Default::default()
        }
    }

    #[test]
    fn rank_helper_averages_ties() {
        assert_eq!(to_ranks(&[3.0, 1.0, 3.0]), vec![1.5, 3.0, 1.5]);
        assert_eq!(to_ranks(&[0.1, 0.9, 0.5]), vec![3.0, 1.0, 2.0]);
        assert_eq!(to_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn ranks_are_invariant_under_monotone_transforms() {
        let v: Vec<f64> = vec![0.3, 0.9, 0.01, 0.5, 0.5];
        let squashed: Vec<f64> = v.iter().map(|x| (5.0 * x).tanh()).collect();
        let shifted: Vec<f64> = v.iter().map(|x| 3.0 * x + 11.0).collect();
        assert_eq!(to_ranks(&v), to_ranks(&squashed));
        assert_eq!(to_ranks(&v), to_ranks(&shifted));
    }

    #[test]
    fn perfect_predictor_band_ranks_first() {
        let ds = planted_dataset(40, 12, 4, 1);
        let ranking = run_ensemble_ranking(&ds, &small_cfg(5)).unwrap();
        assert_eq!(ranking.band_order[0], 4);
        assert!(ranking.avg_rank[4] < 2.0, "avg rank {}", ranking.avg_rank[4]);
        // aggregate invariants
        let mut sorted = ranking.band_order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..12).collect::<Vec<_>>());
        for &r in &ranking.avg_rank {
            assert!((1.0..=12.0).contains(&r));
        }
        for w in ranking.band_order.windows(2) {
            assert!(ranking.avg_rank[w[0]] <= ranking.avg_rank[w[1]]);
        }
    }

    #[test]
    fn band_permutation_permutes_the_ranking() {
        // position-independent rankers only: the stochastic rankers'
        // feature subsampling is positional by construction
        let cfg = EnsembleConfig {
            rankers: vec![RankerKind::FScore, RankerKind::Ridge, RankerKind::Lasso],
            n_iterations: 6,
            master_seed: 9,
            ..Default::default()
        };
        let ds = planted_dataset(30, 8, 2, 2);
        let ranking = run_ensemble_ranking(&ds, &cfg).unwrap();

        // rotate bands left by 3: new column j holds old column (j+3)%8
        let p = 8;
        let perm: Vec<usize> = (0..p).map(|j| (j + 3) % p).collect();
        let rows: Vec<Vec<f64>> = (0..ds.n_samples())
            .map(|i| perm.iter().map(|&j| ds.x().get(i, j)).collect())
            .collect();
        let ds2 = as_dataset(Matrix::from_rows(rows).unwrap(), ds.y().to_vec());
        let ranking2 = run_ensemble_ranking(&ds2, &cfg).unwrap();

        for j in 0..p {
            assert_abs_diff_eq!(
                ranking2.avg_rank[j],
                ranking.avg_rank[perm[j]],
                epsilon = 1e-9
            );
        }
        let mapped: Vec<usize> = ranking.band_order.iter().map(|&b| (b + p - 3) % p).collect();
        assert_eq!(ranking2.band_order, mapped);
    }

    #[test]
    fn dropping_a_ranker_preserves_other_cells() {
        let ds = planted_dataset(30, 6, 1, 3);
        let full = run_ensemble_ranking(&ds, &small_cfg(11)).unwrap();
        let mut reduced_cfg = small_cfg(11);
        reduced_cfg.rankers = vec![
            RankerKind::FScore,
            RankerKind::Ridge,
            RankerKind::RandomForest,
        ];
        let reduced = run_ensemble_ranking(&ds, &reduced_cfg).unwrap();
        for cell in &reduced.contributions {
            let same = full
                .contributions
                .iter()
                .find(|c| c.iteration == cell.iteration && c.ranker == cell.ranker)
                .expect("cell present in the full run");
            assert_eq!(cell.importances, same.importances);
        }
    }

    #[test]
    fn determinism_across_thread_pools() {
        let ds = planted_dataset(30, 6, 5, 4);
        let cfg = small_cfg(13);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_ensemble_ranking(&ds, &cfg).unwrap());
        let b = pool4.install(|| run_ensemble_ranking(&ds, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn all_cells_failing_aborts() {
        // a constant band makes every F-score cell fail
        let mut rng = crate::seed::rng_for(5, 0);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.gen_range(0.0..1.0), 0.7, rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(1.0..3.0)).collect();
        let ds = as_dataset(Matrix::from_rows(rows).unwrap(), y);
        let cfg = EnsembleConfig {
            rankers: vec![RankerKind::FScore],
            n_iterations: 4,
            master_seed: 1,
            ..Default::default()
        };
        let err = run_ensemble_ranking(&ds, &cfg).unwrap_err();
        assert!(matches!(err, Error::EnsembleFailure { failed: 4, total: 4 }));
    }

    #[test]
    fn needs_ten_samples() {
        let ds = planted_dataset(9, 4, 0, 6);
        assert!(run_ensemble_ranking(&ds, &small_cfg(0)).is_err());
    }

    #[test]
    fn optimal_count_finds_planted_support() {
        // three planted bands carry all the signal
        let n = 60;
        let p = 20;
        let mut rng = crate::seed::rng_for(21, 0);
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter_mut()
            .map(|row| {
                2.0 + 0.8 * row[3] + 0.7 * row[9] + 0.9 * row[15]
                    + 0.01 * rng.gen_range(-1.0..1.0)
            })
            .collect();
        let ds = as_dataset(Matrix::from_rows(rows).unwrap(), y);
        let ranking = run_ensemble_ranking(&ds, &small_cfg(31)).unwrap();
        let result = select_optimal_count(&ranking, &ds, 0.005, 15).unwrap();

        assert!(result.chosen_m <= 5, "chose {} bands", result.chosen_m);
        for planted in [3usize, 9, 15] {
            assert!(
                result.selected_bands.contains(&planted),
                "planted band {planted} missing from {:?}",
                result.selected_bands
            );
        }
        // plateau rule: chosen_m never exceeds the argmax of the curve
        let argmax = result
            .curve
            .iter()
            .max_by(|a, b| a.r2.unwrap().partial_cmp(&b.r2.unwrap()).unwrap())
            .unwrap()
            .m;
        assert!(result.chosen_m <= argmax);
        let chosen_r2 = result.curve[result.chosen_m - 1].r2.unwrap();
        let best_r2 = result.curve[argmax - 1].r2.unwrap();
        assert!(chosen_r2 >= best_r2 - 0.005);
    }

    #[test]
    fn infinite_epsilon_chooses_one_band() {
        let ds = planted_dataset(40, 10, 7, 8);
        let ranking = run_ensemble_ranking(&ds, &small_cfg(17)).unwrap();
        let result = select_optimal_count(&ranking, &ds, f64::INFINITY, 10).unwrap();
        assert_eq!(result.chosen_m, 1);
        assert_eq!(result.selected_bands, vec![ranking.band_order[0]]);
    }

    #[test]
    fn unplanted_synth_has_no_persistent_top_band() {
        // depth 0: nitrogen never touches the spectra, so no band should
        // keep winning rank 1 across seeds
        use std::collections::HashMap;
        let mut top_counts: HashMap<usize, usize> = HashMap::new();
        let seeds = 10;
        for seed in 0..seeds {
            let cfg = crate::synth::SynthConfig {
                n_samples: 40,
                bands: 24,
                depth_per_n: 0.0,
                noise_sd: 0.01,
                seed: 900 + seed,
                ..Default::default()
            };
            let ds = crate::synth::generate(&cfg).unwrap();
            let ecfg = EnsembleConfig {
                n_iterations: 6,
                master_seed: seed,
                forest_trees: 15,
                boost_rounds: 15,
                ..Default::default()
            };
            let ranking = run_ensemble_ranking(&ds, &ecfg).unwrap();
            *top_counts.entry(ranking.band_order[0]).or_default() += 1;
        }
        let max_hits = top_counts.values().copied().max().unwrap();
        assert!(
            max_hits < (seeds / 2) as usize,
            "a band won rank 1 in {max_hits}/{seeds} unplanted runs"
        );
    }
}
