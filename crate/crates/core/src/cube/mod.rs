//! Hyperspectral cube handling: header parsing, raw payload decoding,
//! reflectance calibration against white/dark reference regions, ROI
//! spectrum extraction and RGB composites.
//!
//! Cubes are immutable once constructed; calibration returns a new cube.

mod header;
mod io;
mod rgb;

pub use header::{format_header, parse_header};
pub use io::{read_cube, write_cube};
pub use rgb::{render_rgb, rgb_band_indices, RgbImage, BLUE_NM, GREEN_NM, RED_NM};

use crate::dataset::Spectrum;
use crate::error::{Error, Result};
use crate::grid::BandGrid;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    Bil,
    Bip,
    Bsq,
}

impl FromStr for Interleave {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bil" => Ok(Interleave::Bil),
            "bip" => Ok(Interleave::Bip),
            "bsq" => Ok(Interleave::Bsq),
            other => Err(Error::Parse(format!("unknown interleave: {other}"))),
        }
    }
}

/// Payload element type, using the conventional header codes
/// (12 = uint16, 4 = float32).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Uint16,
    Float32,
}

impl DataKind {
    pub fn byte_size(self) -> usize {
        match self {
            DataKind::Uint16 => 2,
            DataKind::Float32 => 4,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            DataKind::Uint16 => 12,
            DataKind::Float32 => 4,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            12 => Ok(DataKind::Uint16),
            4 => Ok(DataKind::Float32),
            other => Err(Error::Parse(format!("unknown data type code: {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    pub fn code(self) -> u32 {
        match self {
            ByteOrder::Little => 0,
            ByteOrder::Big => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(ByteOrder::Little),
            1 => Ok(ByteOrder::Big),
            other => Err(Error::Parse(format!("unknown byte order code: {other}"))),
        }
    }
}

/// Cube dimensions, layout and wavelength axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub lines: usize,
    pub samples: usize,
    pub interleave: Interleave,
    pub data_kind: DataKind,
    pub byte_order: ByteOrder,
    grid: BandGrid,
}

impl CubeHeader {
    pub fn new(
        lines: usize,
        samples: usize,
        interleave: Interleave,
        data_kind: DataKind,
        byte_order: ByteOrder,
        grid: BandGrid,
    ) -> Result<Self> {
        if lines == 0 || samples == 0 {
            return Err(Error::Contract(format!(
                "cube extents must be >= 1, got lines={lines}, samples={samples}"
            )));
        }
        Ok(CubeHeader {
            lines,
            samples,
            interleave,
            data_kind,
            byte_order,
            grid,
        })
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn grid(&self) -> &BandGrid {
        &self.grid
    }

    pub fn payload_len(&self) -> usize {
        self.lines * self.samples * self.bands() * self.data_kind.byte_size()
    }
}

/// Calibrated or raw reflectance cube indexed (line, sample, band).
/// Values are stored band-interleaved-by-pixel so per-pixel spectra are
/// contiguous regardless of the on-disk interleave.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube {
    header: CubeHeader,
    values: Vec<f64>,
    calibrated: bool,
}

impl HyperCube {
    pub fn from_values(header: CubeHeader, values: Vec<f64>, calibrated: bool) -> Result<Self> {
        let expected = header.lines * header.samples * header.bands();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "cube has {} values, header implies {expected}",
                values.len()
            )));
        }
        if calibrated && values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "calibrated cube contains non-finite values".into(),
            ));
        }
        Ok(HyperCube {
            header,
            values,
            calibrated,
        })
    }

    #[inline]
    pub fn header(&self) -> &CubeHeader {
        &self.header
    }

    #[inline]
    pub fn calibrated(&self) -> bool {
        self.calibrated
    }

    #[inline]
    pub fn value(&self, line: usize, sample: usize, band: usize) -> f64 {
        self.values[(line * self.header.samples + sample) * self.header.bands() + band]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-band mean over an ROI's pixels, in row-major pixel order.
    fn roi_band_means(&self, roi: &Roi) -> Vec<f64> {
        let bands = self.header.bands();
        let mut sums = vec![0.0; bands];
        for line in roi.y..roi.y + roi.height {
            for sample in roi.x..roi.x + roi.width {
                let base = (line * self.header.samples + sample) * bands;
                for (s, v) in sums.iter_mut().zip(&self.values[base..base + bands]) {
                    *s += v;
                }
            }
        }
        let count = (roi.width * roi.height) as f64;
        sums.iter_mut().for_each(|s| *s /= count);
        sums
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiKind {
    WhiteRef,
    DarkRef,
    Target,
}

impl FromStr for RoiKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white_ref" => Ok(RoiKind::WhiteRef),
            "dark_ref" => Ok(RoiKind::DarkRef),
            "target" => Ok(RoiKind::Target),
            other => Err(Error::Parse(format!("unknown roi kind: {other}"))),
        }
    }
}

/// Rectangular region of interest in pixel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub id: String,
    pub kind: RoiKind,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn validate_for(&self, header: &CubeHeader) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Contract(format!("roi {} has empty extent", self.id)));
        }
        if self.x + self.width > header.samples || self.y + self.height > header.lines {
            return Err(Error::Contract(format!(
                "roi {} ({}..{} x {}..{}) outside {}x{} cube",
                self.id,
                self.x,
                self.x + self.width,
                self.y,
                self.y + self.height,
                header.samples,
                header.lines
            )));
        }
        Ok(())
    }
}

/// Parse the ROI CSV (columns roi_id,kind,x,y,width,height).
pub fn read_rois<R: std::io::Read>(r: R) -> Result<Vec<Roi>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let expected = ["roi_id", "kind", "x", "y", "width", "height"];
    let header = rdr.headers()?.clone();
    for (i, name) in expected.iter().enumerate() {
        if header.get(i) != Some(name) {
            return Err(Error::Parse(format!(
                "roi header column {i} is {:?}, expected {name:?}",
                header.get(i).unwrap_or("")
            )));
        }
    }
    let mut rois = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_u = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad {what} on roi row {}: {s:?}", line + 2)))
        };
        rois.push(Roi {
            id: rec[0].to_string(),
            kind: rec[1].parse()?,
            x: parse_u(&rec[2], "x")?,
            y: parse_u(&rec[3], "y")?,
            width: parse_u(&rec[4], "width")?,
            height: parse_u(&rec[5], "height")?,
        });
    }
    Ok(rois)
}

/// Reflectance correction against ROI-averaged white/dark references:
/// out = (raw - mean_dark) / (mean_white - mean_dark) * white_abs, per
/// band. Slightly negative outputs from sensor noise are preserved.
pub fn correct_reflectance(
    cube: &HyperCube,
    white: &Roi,
    dark: &Roi,
    white_abs: f64,
) -> Result<HyperCube> {
    if cube.calibrated() {
        return Err(Error::Contract("cube is already calibrated".into()));
    }
    if !(white_abs > 0.0 && white_abs <= 1.0) {
        return Err(Error::Contract(format!(
            "white_abs must lie in (0, 1], got {white_abs}"
        )));
    }
    if white.kind != RoiKind::WhiteRef {
        return Err(Error::Contract(format!("roi {} is not a white_ref", white.id)));
    }
    if dark.kind != RoiKind::DarkRef {
        return Err(Error::Contract(format!("roi {} is not a dark_ref", dark.id)));
    }
    white.validate_for(cube.header())?;
    dark.validate_for(cube.header())?;

    let mean_white = cube.roi_band_means(white);
    let mean_dark = cube.roi_band_means(dark);
    let bands = cube.header.bands();
    for b in 0..bands {
        if mean_white[b] <= mean_dark[b] {
            return Err(Error::Degenerate(format!(
                "band {b} ({} nm): white reference mean {} does not exceed dark mean {}",
                cube.header.grid().wavelength(b),
                mean_white[b],
                mean_dark[b]
            )));
        }
    }

    let scale: Vec<f64> = (0..bands)
        .map(|b| white_abs / (mean_white[b] - mean_dark[b]))
        .collect();
    let mut values = Vec::with_capacity(cube.values.len());
    for chunk in cube.values.chunks_exact(bands) {
        for b in 0..bands {
            values.push((chunk[b] - mean_dark[b]) * scale[b]);
        }
    }
    HyperCube::from_values(cube.header.clone(), values, true)
}

/// Per-band mean spectrum over a target ROI of a calibrated cube.
pub fn extract_roi_spectrum(cube: &HyperCube, roi: &Roi) -> Result<Spectrum> {
    if !cube.calibrated() {
        return Err(Error::Contract(
            "cannot extract spectra from an uncalibrated cube".into(),
        ));
    }
    if roi.kind != RoiKind::Target {
        return Err(Error::Contract(format!("roi {} is not a target", roi.id)));
    }
    roi.validate_for(cube.header())?;
    Spectrum::new(cube.header.grid().clone(), cube.roi_band_means(roi))
}

/// Element-wise mean of several spectra on a shared grid (one composite
/// observation per vine from its leaf ROIs).
pub fn mean_of_rois(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Contract("mean_of_rois needs at least one spectrum".into()))?;
    for (i, s) in spectra.iter().enumerate().skip(1) {
        if s.grid() != first.grid() {
            return Err(Error::Shape(format!(
                "spectrum {i} is on a different band grid"
            )));
        }
    }
    let n = spectra.len() as f64;
    let mut acc = vec![0.0; first.values().len()];
    for s in spectra {
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Spectrum::new(first.grid().clone(), acc)
}
