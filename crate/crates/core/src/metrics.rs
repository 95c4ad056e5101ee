//! Regression metrics on pooled predictions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub rmse: f64,
    pub mae: f64,
}

/// R^2 = 1 - SS_res/SS_tot, RMSE and MAE of predictions against targets.
pub fn metrics(y: &[f64], y_hat: &[f64]) -> Result<Metrics> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Shape(format!(
            "metrics need matching non-empty vectors, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs_sum = 0.0;
    for (&t, &p) in y.iter().zip(y_hat) {
        let e = t - p;
        ss_res += e * e;
        abs_sum += e.abs();
        ss_tot += (t - ybar) * (t - ybar);
    }
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("constant target in metrics".into()));
    }
    Ok(Metrics {
        r2: 1.0 - ss_res / ss_tot,
        rmse: (ss_res / n).sqrt(),
        mae: abs_sum / n,
    })
}
