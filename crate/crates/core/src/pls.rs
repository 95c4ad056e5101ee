//! Single-response partial least squares: iterative (NIPALS) fitting,
//! cross-validated component-count selection, and backward feature
//! elimination on absolute regression coefficients.

use crate::dataset::SpectralDataset;
use crate::error::{Error, Result};
use crate::matrix::{dot, mean, solve_lu, Matrix};
use crate::metrics::metrics;
use crate::model::fold_assignment;
use crate::selection::{CurvePoint, SelectionMethod, SelectionResult};
use rayon::prelude::*;

/// Fitted PLS model in standardized-X space.
#[derive(Clone, Debug, PartialEq)]
pub struct PlsModel {
    /// achieved component count (may stop short of the request when y
    /// deflates to zero)
    pub n_components: usize,
    pub early_stopped: bool,
    /// weights W, loadings P: p x A, column per component
    pub weights: Matrix,
    pub loadings: Matrix,
    /// score-side loadings q: A
    pub q: Vec<f64>,
    /// training scores: n x A
    pub scores: Matrix,
    /// regression coefficients per standardized feature
    pub coef: Vec<f64>,
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
    pub y_mean: f64,
}

impl PlsModel {
    /// Predict raw-scale inputs through the calibration constants.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.coef.len() {
            return Err(Error::Shape(format!(
                "model has {} features, input has {}",
                self.coef.len(),
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut acc = self.y_mean;
                for j in 0..row.len() {
                    acc += self.coef[j] * (row[j] - self.x_means[j]) / self.x_sds[j];
                }
                acc
            })
            .collect())
    }
}

/// Center/scale columns; a constant column gets unit scale so it stays
/// inert (zero weight) instead of failing the whole fit.
fn standardize_guarded(x: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let p = x.cols();
    let mut means = vec![0.0; p];
    let mut sds = vec![1.0; p];
    for j in 0..p {
        let col = x.column(j);
        let m = mean(&col);
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let sd = if n > 1 { (ss / (n as f64 - 1.0)).sqrt() } else { 0.0 };
        means[j] = m;
        if sd > 0.0 {
            sds[j] = sd;
        }
    }
    let mut z = x.clone();
    for i in 0..n {
        let row = z.row_mut(i);
        for j in 0..p {
            row[j] = (row[j] - means[j]) / sds[j];
        }
    }
    (z, means, sds)
}

/// Relative tolerance under which a weight vector counts as zero
/// (y fully deflated).
const WEIGHT_TOL: f64 = 1e-12;

/// Fit PLS with up to `a` components by the single-response iterative
/// algorithm: w = X^T y (unit norm), t = X w, p = X^T t / t^T t,
/// q = y^T t / t^T t, deflate X and y, repeat. Coefficients assemble as
/// W (P^T W)^-1 q.
pub fn fit_plsr(x: &Matrix, y: &[f64], a: usize) -> Result<PlsModel> {
    let n = x.rows();
    let p = x.cols();
    if n != y.len() {
        return Err(Error::Shape(format!(
            "X has {n} rows but y has {}",
            y.len()
        )));
    }
    if a < 1 || a > n.saturating_sub(1).min(p) {
        return Err(Error::Contract(format!(
            "component count {a} outside 1..=min(n-1, p) = {}",
            n.saturating_sub(1).min(p)
        )));
    }
    let (z, x_means, x_sds) = standardize_guarded(x);
    let y_mean = mean(y);
    let mut yd: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let y_scale = dot(&yd, &yd).sqrt().max(1e-300);

    let mut xd = z;
    let mut weights = Matrix::zeros(p, a);
    let mut loadings = Matrix::zeros(p, a);
    let mut scores = Matrix::zeros(n, a);
    let mut q = Vec::with_capacity(a);
    let mut achieved = 0;
    let mut early_stopped = false;

    for comp in 0..a {
        let mut w = xd.t_times_vec(&yd);
        let norm = dot(&w, &w).sqrt();
        if norm <= WEIGHT_TOL * y_scale.max(1.0) {
            early_stopped = true;
            break;
        }
        w.iter_mut().for_each(|v| *v /= norm);
        let t = xd.times_vec(&w);
        let tt = dot(&t, &t);
        if tt <= 1e-300 {
            early_stopped = true;
            break;
        }
        let p_load: Vec<f64> = {
            let mut v = xd.t_times_vec(&t);
            v.iter_mut().for_each(|x| *x /= tt);
            v
        };
        let q_comp = dot(&yd, &t) / tt;

        // deflate
        for i in 0..n {
            let ti = t[i];
            let row = xd.row_mut(i);
            for j in 0..p {
                row[j] -= ti * p_load[j];
            }
            yd[i] -= q_comp * ti;
        }

        for j in 0..p {
            weights.set(j, comp, w[j]);
            loadings.set(j, comp, p_load[j]);
        }
        for i in 0..n {
            scores.set(i, comp, t[i]);
        }
        q.push(q_comp);
        achieved = comp + 1;
    }

    if achieved == 0 {
        // y is uncorrelated with every column: constant-mean model
        return Ok(PlsModel {
            n_components: 0,
            early_stopped: true,
            weights: Matrix::zeros(p, 0),
            loadings: Matrix::zeros(p, 0),
            q: Vec::new(),
            scores: Matrix::zeros(n, 0),
            coef: vec![0.0; p],
            x_means,
            x_sds,
            y_mean,
        })
    }

    // B = W (P^T W)^-1 q over the achieved components
    let mut ptw = Matrix::zeros(achieved, achieved);
    for r in 0..achieved {
        for c in 0..achieved {
            let mut acc = 0.0;
            for j in 0..p {
                acc += loadings.get(j, r) * weights.get(j, c);
            }
            ptw.set(r, c, acc);
        }
    }
    let alpha = solve_lu(ptw, q[..achieved].to_vec())?;
    let mut coef = vec![0.0; p];
    for j in 0..p {
        let mut acc = 0.0;
        for c in 0..achieved {
            acc += weights.get(j, c) * alpha[c];
        }
        coef[j] = acc;
    }

    // trim stored factors to the achieved count
    let keep: Vec<usize> = (0..achieved).collect();
    Ok(PlsModel {
        n_components: achieved,
        early_stopped,
        weights: weights.select_columns(&keep),
        loadings: loadings.select_columns(&keep),
        q,
        scores: scores.select_columns(&keep),
        coef,
        x_means,
        x_sds,
        y_mean,
    })
}

/// Out-of-fold predictions for every component count 1..=a_max in one
/// deflation pass per fold. Row = sample, column = A-1.
fn cv_predictions_per_component(
    x: &Matrix,
    y: &[f64],
    a_max: usize,
    assignment: &[Vec<usize>],
) -> Result<Matrix> {
    let n = x.rows();
    let mut preds = Matrix::zeros(n, a_max);
    let per_fold: Vec<(usize, Vec<Vec<f64>>)> = assignment
        .par_iter()
        .enumerate()
        .map(|(f, holdout)| -> Result<(usize, Vec<Vec<f64>>)> {
            let train: Vec<usize> = (0..n).filter(|i| !holdout.contains(i)).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit_plsr(&xt, &yt, a_max.min(train.len() - 1).max(1))?;

            // walk the deflation recursion on each held-out row
            let rows: Vec<Vec<f64>> = holdout
                .iter()
                .map(|&i| {
                    let raw = x.row(i);
                    let p = raw.len();
                    let mut z: Vec<f64> = (0..p)
                        .map(|j| (raw[j] - model.x_means[j]) / model.x_sds[j])
                        .collect();
                    let mut acc = model.y_mean;
                    let mut out = Vec::with_capacity(a_max);
                    for c in 0..a_max {
                        if c < model.n_components {
                            let mut t = 0.0;
                            for j in 0..p {
                                t += z[j] * model.weights.get(j, c);
                            }
                            acc += model.q[c] * t;
                            for j in 0..p {
                                z[j] -= t * model.loadings.get(j, c);
                            }
                        }
                        out.push(acc);
                    }
                    out
                })
                .collect();
            Ok((f, rows))
        })
        .collect::<Result<_>>()?;

    for (f, rows) in per_fold {
        for (&i, row) in assignment[f].iter().zip(rows) {
            for (c, &v) in row.iter().enumerate() {
                preds.set(i, c, v);
            }
        }
    }
    Ok(preds)
}

/// Component count minimizing pooled cross-validation MSE; ties break to
/// the smaller count.
pub fn choose_components(
    x: &Matrix,
    y: &[f64],
    a_max: usize,
    folds: usize,
    seed: u64,
) -> Result<usize> {
    let n = x.rows();
    let assignment = fold_assignment(n, folds, seed)?;
    let holdout_max = assignment.iter().map(|f| f.len()).max().unwrap_or(0);
    let a_upper = a_max
        .min(n - holdout_max - 1)
        .min(x.cols())
        .max(1);
    let preds = cv_predictions_per_component(x, y, a_upper, &assignment)?;
    let mut best_a = 1;
    let mut best_mse = f64::INFINITY;
    for c in 0..a_upper {
        let mse = (0..n)
            .map(|i| {
                let e = y[i] - preds.get(i, c);
                e * e
            })
            .sum::<f64>()
            / n as f64;
        if mse < best_mse {
            best_mse = mse;
            best_a = c + 1;
        }
    }
    Ok(best_a)
}

#[derive(Clone, Copy, Debug)]
pub struct BackwardConfig {
    pub folds: usize,
    pub a_max: usize,
    pub min_features: usize,
    pub seed: u64,
}

impl Default for BackwardConfig {
    fn default() -> Self {
        BackwardConfig {
            folds: 10,
            a_max: 20,
            min_features: 2,
            seed: 0,
        }
    }
}

/// Backward elimination: repeatedly drop the band with the smallest
/// |coefficient| of a CV-tuned PLS fit, tracking pooled CV MSE at every
/// size; returns the band set with the minimum MSE over the whole
/// trajectory (ties go to fewer bands).
pub fn plsr_backward_select(ds: &SpectralDataset, cfg: BackwardConfig) -> Result<SelectionResult> {
    let n = ds.n_samples();
    let p = ds.n_bands();
    if cfg.min_features < 1 || cfg.min_features > p {
        return Err(Error::Contract(format!(
            "min_features {} outside 1..={p}",
            cfg.min_features
        )));
    }
    let assignment = fold_assignment(n, cfg.folds, cfg.seed)?;
    let holdout_max = assignment.iter().map(|f| f.len()).max().unwrap_or(0);
    let y = ds.y();

    let mut active: Vec<usize> = (0..p).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, Vec<usize>)> = None;

    loop {
        let m = active.len();
        let x = ds.x().select_columns(&active);
        let a_upper = cfg.a_max.min(n - holdout_max - 1).min(m).max(1);

        let preds = cv_predictions_per_component(&x, y, a_upper, &assignment)?;
        let mut best_a = 1;
        let mut best_mse = f64::INFINITY;
        for c in 0..a_upper {
            let mse = (0..n)
                .map(|i| {
                    let e = y[i] - preds.get(i, c);
                    e * e
                })
                .sum::<f64>()
                / n as f64;
            if mse < best_mse {
                best_mse = mse;
                best_a = c + 1;
            }
        }
        let pooled: Vec<f64> = (0..n).map(|i| preds.get(i, best_a - 1)).collect();
        let metr = metrics(y, &pooled)?;
        curve.push(CurvePoint {
            m,
            rmse: Some(best_mse.sqrt()),
            r2: Some(metr.r2),
        });
        // <= so equal MSE prefers the smaller (later-seen) set
        if best.as_ref().map_or(true, |(mse, _)| best_mse <= *mse) {
            best = Some((best_mse, active.clone()));
        }

        if m == cfg.min_features {
            break;
        }

        // rank by |coef| on the full data with the CV-chosen A
        let model = fit_plsr(&x, y, best_a)?;
        let mut drop_pos = 0;
        let mut drop_abs = f64::INFINITY;
        for (pos, c) in model.coef.iter().enumerate() {
            if c.abs() < drop_abs {
                drop_abs = c.abs();
                drop_pos = pos;
            }
        }
        active.remove(drop_pos);
    }

    let (_, selected) = best.expect("at least one elimination step ran");
    curve.sort_by_key(|pt| pt.m);
    let result = SelectionResult {
        method: SelectionMethod::PlsrBackward,
        grid: ds.grid().clone(),
        chosen_m: selected.len(),
        selected_bands: selected,
        curve,
    };
    result.validate()?;
    Ok(result)
}
