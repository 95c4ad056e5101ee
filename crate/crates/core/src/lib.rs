//! Hyperspectral band selection and nitrogen prediction from leaf spectra.
//!
//! The crate covers the full path from raw hyperspectral cubes to trained
//! regressors: reflectance calibration, ROI spectrum extraction, spectral
//! pre-treatment (trim / SNV / Savitzky-Golay), correlation-based
//! redundancy removal, two independent band selectors (ensemble ranking
//! and PLSR backward elimination), band-set intersection, and boosted-tree
//! regression with grid-searched hyperparameters. A synthetic-spectra
//! generator with planted nitrogen-sensitive bands serves as the built-in
//! verification oracle.

pub mod cube;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod linear;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod pls;
pub mod preprocess;
pub mod redundancy;
pub mod seed;
pub mod selection;
pub mod synth;
pub mod trees;

pub use dataset::{Level, SampleMeta, SpectralDataset, Spectrum, Stage};
pub use error::{Error, Result};
pub use grid::BandGrid;
pub use matrix::Matrix;
pub use selection::SelectionResult;
