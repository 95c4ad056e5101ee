//! Spectra, sample metadata and the dataset CSV format.

use crate::error::{Error, Result};
use crate::grid::BandGrid;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

/// One reflectance spectrum on a band grid. Values are unitless
/// reflectance, typically in [0, 1.2] before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: BandGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: BandGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Shape(format!(
                "spectrum has {} values on a {}-band grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("spectrum contains non-finite values".into()));
        }
        Ok(Spectrum { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &BandGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Bloom,
    Veraison,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Bloom => write!(f, "bloom"),
            Stage::Veraison => write!(f, "veraison"),
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bloom" => Ok(Stage::Bloom),
            "veraison" => Ok(Stage::Veraison),
            other => Err(Error::Parse(format!("unknown stage: {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Leaf,
    Canopy,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Leaf => write!(f, "leaf"),
            Level::Canopy => write!(f, "canopy"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leaf" => Ok(Level::Leaf),
            "canopy" => Ok(Level::Canopy),
            other => Err(Error::Parse(format!("unknown level: {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub cultivar: String,
    pub stage: Stage,
    pub season: String,
    pub level: Level,
}

/// Per-sample spectra with the nitrogen target (% dry weight).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDataset {
    grid: BandGrid,
    x: Matrix,
    y: Vec<f64>,
    meta: Vec<SampleMeta>,
}

impl SpectralDataset {
    pub fn new(grid: BandGrid, x: Matrix, y: Vec<f64>, meta: Vec<SampleMeta>) -> Result<Self> {
        if x.rows() != y.len() || x.rows() != meta.len() {
            return Err(Error::Shape(format!(
                "dataset rows disagree: X has {}, y has {}, meta has {}",
                x.rows(),
                y.len(),
                meta.len()
            )));
        }
        if x.cols() != grid.len() {
            return Err(Error::Shape(format!(
                "X has {} bands but the grid has {}",
                x.cols(),
                grid.len()
            )));
        }
        for (i, &v) in y.iter().enumerate() {
            if !(v > 0.0 && v < 10.0) {
                return Err(Error::Contract(format!(
                    "nitrogen target out of range (0, 10) at sample {i}: {v}"
                )));
            }
        }
        Ok(SpectralDataset { grid, x, y, meta })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn n_bands(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn grid(&self) -> &BandGrid {
        &self.grid
    }

    #[inline]
    pub fn x(&self) -> &Matrix {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn meta(&self) -> &[SampleMeta] {
        &self.meta
    }

    pub fn spectrum(&self, i: usize) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            values: self.x.row(i).to_vec(),
        }
    }

    /// Dataset restricted to the given band indices (ascending).
    pub fn restrict_to_bands(&self, bands: &[usize]) -> Result<SpectralDataset> {
        let grid = self.grid.subset(bands)?;
        SpectralDataset::new(
            grid,
            self.x.select_columns(bands),
            self.y.clone(),
            self.meta.clone(),
        )
    }

    /// Dataset restricted to the given sample rows (in the order given).
    pub fn restrict_to_samples(&self, rows: &[usize]) -> Result<SpectralDataset> {
        SpectralDataset::new(
            self.grid.clone(),
            self.x.select_rows(rows),
            rows.iter().map(|&i| self.y[i]).collect(),
            rows.iter().map(|&i| self.meta[i].clone()).collect(),
        )
    }

    /// Replace the spectra matrix, keeping targets and metadata.
    pub fn with_spectra(&self, grid: BandGrid, x: Matrix) -> Result<SpectralDataset> {
        SpectralDataset::new(grid, x, self.y.clone(), self.meta.clone())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = vec![
            "sample_id".into(),
            "cultivar".into(),
            "stage".into(),
            "season".into(),
            "level".into(),
            "N_pct".into(),
        ];
        header.extend(self.grid.wavelengths().iter().map(|w| format!("{w}")));
        wtr.write_record(&header)?;
        for i in 0..self.n_samples() {
            let m = &self.meta[i];
            let mut rec: Vec<String> = vec![
                m.sample_id.clone(),
                m.cultivar.clone(),
                m.stage.to_string(),
                m.season.clone(),
                m.level.to_string(),
                format!("{}", self.y[i]),
            ];
            rec.extend(self.x.row(i).iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SpectralDataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        let fixed = ["sample_id", "cultivar", "stage", "season", "level", "N_pct"];
        if header.len() < fixed.len() + 1 {
            return Err(Error::Parse(format!(
                "dataset header has {} columns, expected at least {}",
                header.len(),
                fixed.len() + 1
            )));
        }
        for (i, name) in fixed.iter().enumerate() {
            if header.get(i) != Some(name) {
                return Err(Error::Parse(format!(
                    "dataset header column {i} is {:?}, expected {name:?}",
                    header.get(i).unwrap_or("")
                )));
            }
        }
        let wavelengths: Vec<f64> = header
            .iter()
            .skip(fixed.len())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad wavelength column header: {s:?}")))
            })
            .collect::<Result<_>>()?;
        let grid = BandGrid::new(wavelengths)?;

        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut meta = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != fixed.len() + grid.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    rec.len(),
                    fixed.len() + grid.len()
                )));
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad {what} on row {}: {s:?}", line + 2)))
            };
            meta.push(SampleMeta {
                sample_id: rec[0].to_string(),
                cultivar: rec[1].to_string(),
                stage: rec[2].parse()?,
                season: rec[3].to_string(),
                level: rec[4].parse()?,
            });
            y.push(parse_f(&rec[5], "N_pct")?);
            let vals: Vec<f64> = rec
                .iter()
                .skip(fixed.len())
                .map(|s| parse_f(s, "reflectance"))
                .collect::<Result<_>>()?;
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(Error::Parse("dataset has no sample rows".into()));
        }
        SpectralDataset::new(grid, Matrix::from_rows(rows)?, y, meta)
    }

    pub fn read_csv_path(path: &Path) -> Result<SpectralDataset> {
        let f = std::fs::File::open(path)?;
        SpectralDataset::read_csv(std::io::BufReader::new(f))
    }
}

/// Hex SHA-256 of a file's bytes; used for report provenance.
pub fn content_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

/// Hex SHA-256 of an in-memory buffer.
pub fn bytes_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}
