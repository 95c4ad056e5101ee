//! Spectral pre-treatment: band trimming, SNV normalization,
//! Savitzky-Golay smoothing and data-driven SG window selection.
//!
//! Pipeline order is fixed as trim -> SNV -> SG; the dataset-level
//! helpers below apply one step to every sample.

use crate::dataset::{SpectralDataset, Spectrum};
use crate::error::{Error, Result};
use crate::matrix::{mean, solve_spd, Matrix};
use rayon::prelude::*;

/// Savitzky-Golay convolution filter. Weights come from a least-squares
/// polynomial fit over the centered window, so applying the filter to
/// samples of a polynomial of degree <= poly_order reproduces it exactly
/// (away from padded edges for deriv = 0).
#[derive(Clone, Debug, PartialEq)]
pub struct SgFilter {
    window: usize,
    poly_order: usize,
    deriv: usize,
    weights: Vec<f64>,
}

impl SgFilter {
    #[inline]
    pub fn window(&self) -> usize {
        self.window
    }

    #[inline]
    pub fn poly_order(&self) -> usize {
        self.poly_order
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Least-squares SG coefficients for the window center, solved from the
/// normal equations of the polynomial fit.
pub fn sg_coefficients(window: usize, poly_order: usize, deriv: usize) -> Result<SgFilter> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::Contract(format!(
            "SG window must be odd and >= 3, got {window}"
        )));
    }
    if poly_order >= window {
        return Err(Error::Contract(format!(
            "SG poly_order {poly_order} must be < window {window}"
        )));
    }
    if deriv > poly_order {
        return Err(Error::Contract(format!(
            "SG deriv {deriv} must be <= poly_order {poly_order}"
        )));
    }
    let half = (window as isize - 1) / 2;
    let m = poly_order + 1;

    // Gram matrix G[a][b] = sum_t t^(a+b); odd power sums vanish.
    let mut g = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut s = 0.0;
            for t in -half..=half {
                s += (t as f64).powi((a + b) as i32);
            }
            g.set(a, b, s);
        }
    }
    let mut e = vec![0.0; m];
    e[deriv] = 1.0;
    let c = solve_spd(g, &e)?;

    let d_fact: f64 = (1..=deriv).map(|k| k as f64).product();
    let weights = (-half..=half)
        .map(|t| {
            let mut s = 0.0;
            for (a, ca) in c.iter().enumerate() {
                s += ca * (t as f64).powi(a as i32);
            }
            s * d_fact
        })
        .collect();
    Ok(SgFilter {
        window,
        poly_order,
        deriv,
        weights,
    })
}

/// Mirror index around the edges without repeating the edge point:
/// -1 -> 1, -2 -> 2, n -> n-2, n+1 -> n-3.
#[inline]
fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

/// Convolve a spectrum with an SG filter; output keeps the input length.
pub fn sg_smooth(s: &Spectrum, f: &SgFilter) -> Result<Spectrum> {
    let vals = sg_smooth_values(s.values(), f)?;
    Spectrum::new(s.grid().clone(), vals)
}

pub(crate) fn sg_smooth_values(x: &[f64], f: &SgFilter) -> Result<Vec<f64>> {
    let n = x.len();
    if n < f.window {
        return Err(Error::Contract(format!(
            "spectrum has {n} bands, shorter than SG window {}",
            f.window
        )));
    }
    let half = (f.window as isize - 1) / 2;
    let out = (0..n as isize)
        .map(|i| {
            let mut acc = 0.0;
            for (k, w) in f.weights.iter().enumerate() {
                let j = mirror_index(i + k as isize - half, n);
                acc += w * x[j];
            }
            acc
        })
        .collect();
    Ok(out)
}

/// Standard normal variate: center and scale one spectrum to mean 0,
/// sample (n-1) standard deviation 1.
pub fn snv(s: &Spectrum) -> Result<Spectrum> {
    let vals = snv_values(s.values())?;
    Spectrum::new(s.grid().clone(), vals)
}

pub(crate) fn snv_values(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::Contract("SNV needs at least 2 bands".into()));
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let sd = (ss / (x.len() as f64 - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::Degenerate("degenerate spectrum: zero variance".into()));
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// Drop the first `head` and last `tail` bands of every spectrum.
pub fn trim_bands(ds: &SpectralDataset, head: usize, tail: usize) -> Result<SpectralDataset> {
    let grid = ds.grid().trimmed(head, tail)?;
    let p = ds.n_bands();
    let keep: Vec<usize> = (head..p - tail).collect();
    ds.with_spectra(grid, ds.x().select_columns(&keep))
}

/// SNV applied to every sample.
pub fn snv_dataset(ds: &SpectralDataset) -> Result<SpectralDataset> {
    let rows: Vec<Vec<f64>> = (0..ds.n_samples())
        .into_par_iter()
        .map(|i| snv_values(ds.x().row(i)))
        .collect::<Result<_>>()?;
    ds.with_spectra(ds.grid().clone(), Matrix::from_rows(rows)?)
}

/// SG smoothing applied to every sample.
pub fn sg_smooth_dataset(ds: &SpectralDataset, f: &SgFilter) -> Result<SpectralDataset> {
    let rows: Vec<Vec<f64>> = (0..ds.n_samples())
        .into_par_iter()
        .map(|i| sg_smooth_values(ds.x().row(i), f))
        .collect::<Result<_>>()?;
    ds.with_spectra(ds.grid().clone(), Matrix::from_rows(rows)?)
}

/// Thresholds for the frequency-domain window selection rule.
#[derive(Clone, Copy, Debug)]
pub struct WindowRule {
    /// Noise cutoff: lowest frequency bin where the mean raw spectrum's
    /// power drops below this fraction of its maximum.
    pub raw_power_cutoff: f64,
    /// A window qualifies while its mean residual keeps less than this
    /// fraction of its total power below the cutoff.
    pub leakage_limit: f64,
}

impl Default for WindowRule {
    fn default() -> Self {
        WindowRule {
            raw_power_cutoff: 0.01,
            leakage_limit: 0.05,
        }
    }
}

/// One-sided DFT power spectrum, bins 0..=n/2.
fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut p = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &v) in x.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        p.push(re * re + im * im);
    }
    p
}

/// Pick the widest SG window that smooths noise without eating signal:
/// the residual x - sg(x), averaged over samples, must keep its power
/// below the raw spectrum's noise cutoff under `rule.leakage_limit`.
/// Falls back to the smallest candidate when none qualifies.
pub fn select_sg_window(
    ds: &SpectralDataset,
    candidates: &[usize],
    poly_order: usize,
    rule: WindowRule,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Contract("no SG window candidates given".into()));
    }
    if ds.n_samples() == 0 {
        return Err(Error::Contract("empty dataset".into()));
    }
    let p = ds.n_bands();
    let n = ds.n_samples() as f64;

    let mut usable: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&w| {
            let ok = w % 2 == 1 && w >= 3 && poly_order < w && w <= p;
            if !ok {
                log::warn!("skipping unusable SG window candidate {w}");
            }
            ok
        })
        .collect();
    usable.sort_unstable();
    usable.dedup();
    if usable.is_empty() {
        return Err(Error::Contract("no usable SG window candidates".into()));
    }

    let mut mean_raw = vec![0.0; p];
    for i in 0..ds.n_samples() {
        for (m, &v) in mean_raw.iter_mut().zip(ds.x().row(i)) {
            *m += v;
        }
    }
    for m in &mut mean_raw {
        *m /= n;
    }
    // The DC bin measures offset, not frequency content; skip it in the
    // cutoff search and in the residual sums. The cutoff is the lowest
    // bin past which raw power stays under the threshold, so interference
    // nulls inside the signal band do not end it early.
    let raw_power = power_spectrum(&mean_raw);
    let max_power = raw_power.iter().skip(1).cloned().fold(0.0_f64, f64::max);
    let threshold = rule.raw_power_cutoff * max_power;
    let cutoff = raw_power
        .iter()
        .rposition(|&pw| pw >= threshold)
        .map(|k| k + 1)
        .unwrap_or(raw_power.len());

    let mut chosen = None;
    for &w in usable.iter().rev() {
        let filt = sg_coefficients(w, poly_order, 0)?;
        let mut mean_residual = vec![0.0; p];
        for i in 0..ds.n_samples() {
            let sm = sg_smooth_values(ds.x().row(i), &filt)?;
            for ((r, &raw), s) in mean_residual.iter_mut().zip(ds.x().row(i)).zip(sm) {
                *r += raw - s;
            }
        }
        for r in &mut mean_residual {
            *r /= n;
        }
        let res_power = power_spectrum(&mean_residual);
        let total: f64 = res_power.iter().skip(1).sum();
        let below: f64 = res_power.iter().take(cutoff).skip(1).sum();
        if total == 0.0 || below < rule.leakage_limit * total {
            chosen = Some(w);
            break;
        }
    }
    Ok(chosen.unwrap_or(usable[0]))
}

/// Default window candidates {5, 7, ..., 31}.
pub fn default_window_candidates() -> Vec<usize> {
    (5..=31).step_by(2).collect()
}
