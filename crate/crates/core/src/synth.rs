//! Synthetic vegetation spectra with planted nitrogen-dependent
//! absorption bands: the verification oracle for the selection pipeline.
//!
//! Every sample shares one smooth vegetation-like baseline (green
//! reflectance bump, red-edge sigmoid, NIR plateau). Nitrogen enters only
//! through Gaussian absorption dips at the planted centers, so any band
//! selector worth its salt must find those regions.

use crate::dataset::{Level, SampleMeta, SpectralDataset, Stage};
use crate::error::{Error, Result};
use crate::grid::BandGrid;
use crate::matrix::Matrix;
use crate::seed::rng_for;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub bands: usize,
    pub start_nm: f64,
    pub stop_nm: f64,
    pub planted_centers_nm: Vec<f64>,
    /// absorption depth per % DW of nitrogen
    pub depth_per_n: f64,
    /// Gaussian dip width in nm
    pub sigma_nm: f64,
    pub noise_sd: f64,
    pub n_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 200,
            bands: 274,
            start_nm: 400.0,
            stop_nm: 1000.0,
            planted_centers_nm: vec![505.0, 680.0, 755.0, 910.0],
            depth_per_n: 0.03,
            sigma_nm: 10.0,
            noise_sd: 0.01,
            n_range: (1.63, 3.43),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Contract("n_samples must be >= 1".into()));
        }
        if !(self.n_range.0 < self.n_range.1) {
            return Err(Error::Contract(format!(
                "n_range low {} must be below high {}",
                self.n_range.0, self.n_range.1
            )));
        }
        if !(self.n_range.0 > 0.0 && self.n_range.1 < 10.0) {
            return Err(Error::Contract("n_range must stay inside (0, 10) % DW".into()));
        }
        for &c in &self.planted_centers_nm {
            if c < self.start_nm || c > self.stop_nm {
                return Err(Error::Contract(format!(
                    "planted center {c} nm outside the {}..{} grid",
                    self.start_nm, self.stop_nm
                )));
            }
        }
        if self.noise_sd < 0.0 || self.depth_per_n < 0.0 || self.sigma_nm <= 0.0 {
            return Err(Error::Contract("negative noise/depth or non-positive sigma".into()));
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Fixed smooth vegetation-like reflectance baseline.
pub fn baseline(nm: f64) -> f64 {
    let green_bump = 0.08 * (-(nm - 550.0) * (nm - 550.0) / (2.0 * 40.0 * 40.0)).exp();
    let red_edge = 0.42 * sigmoid((nm - 715.0) / 12.0);
    0.10 + green_bump + red_edge
}

/// Noise-free spectrum for a given nitrogen level.
pub fn clean_spectrum(cfg: &SynthConfig, grid: &BandGrid, n_pct: f64) -> Vec<f64> {
    grid.wavelengths()
        .iter()
        .map(|&nm| {
            let dip: f64 = cfg
                .planted_centers_nm
                .iter()
                .map(|&c| {
                    cfg.depth_per_n
                        * n_pct
                        * (-(nm - c) * (nm - c) / (2.0 * cfg.sigma_nm * cfg.sigma_nm)).exp()
                })
                .sum();
            baseline(nm) - dip
        })
        .collect()
}

/// Generate a dataset; samples are independent with counter-derived
/// per-sample seeds, so the output is one function of (config).
pub fn generate(cfg: &SynthConfig) -> Result<SpectralDataset> {
    cfg.validate()?;
    let grid = BandGrid::uniform(cfg.start_nm, cfg.stop_nm, cfg.bands)?;
    let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Contract(format!("bad noise distribution: {e}")))?;

    let mut rows = Vec::with_capacity(cfg.n_samples);
    let mut y = Vec::with_capacity(cfg.n_samples);
    let mut meta = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let mut rng = rng_for(cfg.seed, i as u64);
        let n_pct = rng.gen_range(cfg.n_range.0..cfg.n_range.1);
        let mut vals = clean_spectrum(cfg, &grid, n_pct);
        if cfg.noise_sd > 0.0 {
            for v in &mut vals {
                *v += noise.sample(&mut rng);
            }
        }
        rows.push(vals);
        y.push(n_pct);
        meta.push(SampleMeta {
            sample_id: format!("synth{i:04}"),
            cultivar: "synthetic".into(),
            stage: if i % 2 == 0 { Stage::Bloom } else { Stage::Veraison },
            season: "2024".into(),
            level: Level::Leaf,
        });
    }
    SpectralDataset::new(grid, Matrix::from_rows(rows)?, y, meta)
}
