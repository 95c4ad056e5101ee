//! Linear building blocks for the rankers and the LOOCV feature curve:
//! ordinary least squares, ridge, lasso coordinate descent, univariate
//! F-scores, and hat-matrix leave-one-out cross-validation.

use crate::error::{Error, Result};
use crate::matrix::{dot, mean, pearson, solve_spd, Cholesky, Matrix};
use serde::{Deserialize, Serialize};

pub const LASSO_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Ols,
    Ridge,
    Lasso,
}

/// Coefficients of a linear fit on (standardized) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub kind: FitKind,
}

impl LinearFit {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| self.intercept + dot(x.row(i), &self.coef))
            .collect()
    }
}

/// Column means and sample standard deviations of a standardized matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut z = x.clone();
        for i in 0..z.rows() {
            let row = z.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.sds[j];
            }
        }
        z
    }
}

/// Center and scale every column to sample sd 1. Errors on a constant
/// column (naming it).
pub fn standardize(x: &Matrix) -> Result<(Matrix, Standardization)> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 {
        return Err(Error::Contract("standardize needs at least 2 rows".into()));
    }
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let m = mean(&col);
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 {
            return Err(Error::Degenerate(format!("constant column at index {j}")));
        }
        means[j] = m;
        sds[j] = sd;
    }
    let st = Standardization { means, sds };
    Ok((st.apply(x), st))
}

/// Least squares with intercept, solved from the normal equations of the
/// augmented design [1 Z] with an SPD factorization.
pub fn ols_fit(z: &Matrix, y: &[f64]) -> Result<LinearFit> {
    let n = z.rows();
    let p = z.cols();
    if n <= p {
        return Err(Error::Contract(format!(
            "OLS needs n > p, got n={n}, p={p}"
        )));
    }
    let (g, aty) = augmented_normal_equations(z, y);
    let sol = solve_spd(g, &aty)
        .map_err(|_| Error::Degenerate("rank-deficient design in OLS".into()))?;
    Ok(LinearFit {
        intercept: sol[0],
        coef: sol[1..].to_vec(),
        lambda: 0.0,
        kind: FitKind::Ols,
    })
}

/// Normal equations of [1 Z]: returns (A^T A, A^T y).
fn augmented_normal_equations(z: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let n = z.rows();
    let p = z.cols();
    let mut g = Matrix::zeros(p + 1, p + 1);
    let mut aty = vec![0.0; p + 1];
    g.set(0, 0, n as f64);
    for i in 0..n {
        let row = z.row(i);
        aty[0] += y[i];
        for a in 0..p {
            g.set(0, a + 1, g.get(0, a + 1) + row[a]);
            aty[a + 1] += row[a] * y[i];
            for b in a..p {
                g.set(a + 1, b + 1, g.get(a + 1, b + 1) + row[a] * row[b]);
            }
        }
    }
    for a in 0..p + 1 {
        for b in 0..a {
            g.set(a, b, g.get(b, a));
        }
    }
    (g, aty)
}

/// Ridge regression: coef = (Z^T Z + n*lambda*I)^-1 Z^T (y - mean(y)),
/// intercept = mean(y). Expects centered (standardized) columns.
pub fn ridge_fit(z: &Matrix, y: &[f64], lambda: f64) -> Result<LinearFit> {
    if lambda < 0.0 {
        return Err(Error::Contract("ridge lambda must be >= 0".into()));
    }
    let n = z.rows();
    let p = z.cols();
    let ybar = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut g = z.gram();
    for j in 0..p {
        g.set(j, j, g.get(j, j) + n as f64 * lambda);
    }
    let coef = solve_spd(g, &z.t_times_vec(&yc))?;
    Ok(LinearFit {
        coef,
        intercept: ybar,
        lambda,
        kind: FitKind::Ridge,
    })
}

#[inline]
fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent with soft-thresholding on the
/// objective (1/2n)||y - Zc||^2 + lambda*||c||_1. Z must be standardized.
pub fn lasso_fit(z: &Matrix, y: &[f64], lambda: f64) -> Result<LinearFit> {
    lasso_fit_traced(z, y, lambda).map(|(fit, _)| fit)
}

pub(crate) fn lasso_fit_traced(
    z: &Matrix,
    y: &[f64],
    lambda: f64,
) -> Result<(LinearFit, Vec<f64>)> {
    if lambda < 0.0 {
        return Err(Error::Contract("lasso lambda must be >= 0".into()));
    }
    let n = z.rows();
    let p = z.cols();
    let nf = n as f64;
    let ybar = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();

    let cols: Vec<Vec<f64>> = (0..p).map(|j| z.column(j)).collect();
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c) / nf).collect();

    let mut coef = vec![0.0; p];
    let mut resid = yc.clone();
    let objective = |coef: &[f64], resid: &[f64]| -> f64 {
        dot(resid, resid) / (2.0 * nf) + lambda * coef.iter().map(|c| c.abs()).sum::<f64>()
    };
    let mut trace = vec![objective(&coef, &resid)];

    for sweep in 1..=LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            let old = coef[j];
            let rho = dot(&cols[j], &resid) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                let delta = new - old;
                for (r, zj) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * zj;
                }
                coef[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        trace.push(objective(&coef, &resid));
        if max_delta < LASSO_TOL {
            return Ok((
                LinearFit {
                    coef,
                    intercept: ybar,
                    lambda,
                    kind: FitKind::Lasso,
                },
                trace,
            ));
        }
        if sweep == LASSO_MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps: sweep });
        }
    }
    unreachable!()
}

/// Largest lambda with any nonzero lasso coefficient: max|Z^T(y-mean)|/n.
pub fn lasso_lambda_max(z: &Matrix, y: &[f64]) -> f64 {
    let ybar = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    z.t_times_vec(&yc)
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        / z.rows() as f64
}

/// Univariate regression F statistic per feature:
/// F = r^2 (n-2) / (1 - r^2) with r = corr(feature, y).
/// A perfect correlation maps to the largest finite value.
pub fn f_scores(z: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let n = z.rows();
    if n < 3 {
        return Err(Error::Contract(format!(
            "F-scores need at least 3 samples, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(z.cols());
    for j in 0..z.cols() {
        let col = z.column(j);
        let m = mean(&col);
        if col.iter().all(|&v| v == m) {
            return Err(Error::Degenerate(format!("zero-variance feature at index {j}")));
        }
        let r = pearson(&col, y);
        let r2 = r * r;
        // r^2 of 1 up to rounding maps to the largest finite value
        let f = if 1.0 - r2 < 1e-12 {
            f64::MAX
        } else {
            r2 * (n as f64 - 2.0) / (1.0 - r2)
        };
        out.push(f);
    }
    Ok(out)
}

/// Leave-one-out CV of the multiple linear regression on Z via the
/// hat-matrix shortcut e_i / (1 - h_ii). Returns (rmse, r2) of the LOO
/// predictions against y.
pub fn loocv_mlr(z: &Matrix, y: &[f64]) -> Result<(f64, f64)> {
    let n = z.rows();
    let m = z.cols();
    if n <= m + 1 {
        return Err(Error::Contract(format!(
            "LOOCV needs n > m+1, got n={n}, m={m}"
        )));
    }
    let (g, aty) = augmented_normal_equations(z, y);
    let chol = Cholesky::factor(g)
        .map_err(|_| Error::Degenerate("rank-deficient design in LOOCV".into()))?;
    let sol = chol.solve(&aty);
    let ginv = chol.inverse();

    let ybar = mean(y);
    let mut press = 0.0;
    let mut ss_tot = 0.0;
    let mut row = vec![0.0; m + 1];
    for i in 0..n {
        row[0] = 1.0;
        row[1..].copy_from_slice(z.row(i));
        let pred = dot(&row, &sol);
        // h_ii = a_i^T G^-1 a_i
        let mut h = 0.0;
        for a in 0..m + 1 {
            let mut acc = 0.0;
            for b in 0..m + 1 {
                acc += ginv.get(a, b) * row[b];
            }
            h += row[a] * acc;
        }
        if h >= 1.0 - 1e-10 {
            return Err(Error::Degenerate(format!(
                "leverage-one sample at row {i} (h = {h})"
            )));
        }
        let loo = (y[i] - pred) / (1.0 - h);
        press += loo * loo;
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    let rmse = (press / n as f64).sqrt();
    let r2 = 1.0 - press / ss_tot;
    Ok((rmse, r2))
}
