//! Wavelength axis shared by cubes, spectra and datasets.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ordered wavelength axis in nm. Strictly increasing by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandGrid {
    wavelengths_nm: Vec<f64>,
}

impl BandGrid {
    pub fn new(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::Parse("empty wavelength list".into()));
        }
        for (i, w) in wavelengths_nm.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Parse(format!(
                    "wavelengths not increasing at index {}",
                    i + 1
                )));
            }
        }
        if wavelengths_nm.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parse("non-finite wavelength".into()));
        }
        Ok(BandGrid { wavelengths_nm })
    }

    /// Evenly spaced axis with `bands` points from `start` to `stop` inclusive.
    pub fn uniform(start_nm: f64, stop_nm: f64, bands: usize) -> Result<Self> {
        if bands < 2 || stop_nm <= start_nm {
            return Err(Error::Contract("uniform grid needs bands >= 2 and stop > start".into()));
        }
        let step = (stop_nm - start_nm) / (bands - 1) as f64;
        BandGrid::new((0..bands).map(|i| start_nm + step * i as f64).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.wavelengths_nm.is_empty()
    }

    #[inline]
    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    #[inline]
    pub fn wavelength(&self, band: usize) -> f64 {
        self.wavelengths_nm[band]
    }

    /// Index of the band closest to `nm`; ties break to the lower wavelength.
    pub fn nearest_band(&self, nm: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &w) in self.wavelengths_nm.iter().enumerate() {
            let d = (w - nm).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Drop the first `head` and last `tail` bands.
    pub fn trimmed(&self, head: usize, tail: usize) -> Result<BandGrid> {
        let p = self.len();
        if p <= head + tail {
            return Err(Error::Contract(format!(
                "cannot trim {head}+{tail} bands from a {p}-band grid"
            )));
        }
        BandGrid::new(self.wavelengths_nm[head..p - tail].to_vec())
    }

    /// Sub-grid at the given band indices (must be ascending).
    pub fn subset(&self, bands: &[usize]) -> Result<BandGrid> {
        BandGrid::new(bands.iter().map(|&b| self.wavelengths_nm[b]).collect())
    }
}
