//! Shared output type for the two band selectors.

use crate::error::{Error, Result};
use crate::grid::BandGrid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Ensemble,
    PlsrBackward,
}

/// One evaluated feature-count on the selection curve. `rmse`/`r2` are
/// absent when the evaluation failed at that size (recorded, not fatal).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub rmse: Option<f64>,
    pub r2: Option<f64>,
}

/// Selected band indices plus the cross-validation curve they came from.
/// Indices refer to `grid`, the (already reduced) grid the selector ran on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub grid: BandGrid,
    pub selected_bands: Vec<usize>,
    pub chosen_m: usize,
    pub curve: Vec<CurvePoint>,
}

impl SelectionResult {
    pub fn validate(&self) -> Result<()> {
        if self.chosen_m != self.selected_bands.len() {
            return Err(Error::Contract(format!(
                "chosen_m {} disagrees with {} selected bands",
                self.chosen_m,
                self.selected_bands.len()
            )));
        }
        if let Some(&max) = self.selected_bands.iter().max() {
            if max >= self.grid.len() {
                return Err(Error::Contract(format!(
                    "selected band index {max} outside the {}-band grid",
                    self.grid.len()
                )));
            }
        }
        Ok(())
    }

    pub fn selected_wavelengths(&self) -> Vec<f64> {
        self.selected_bands
            .iter()
            .map(|&b| self.grid.wavelength(b))
            .collect()
    }
}
