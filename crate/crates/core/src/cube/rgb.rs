//! RGB composites from three fixed visible bands, written as binary PPM.

use super::HyperCube;
use crate::error::{Error, Result};
use crate::grid::BandGrid;

pub const RED_NM: f64 = 677.732;
pub const GREEN_NM: f64 = 547.321;
pub const BLUE_NM: f64 = 487.642;

/// 8-bit interleaved RGB raster (width = samples, height = lines).
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Band indices nearest the composite wavelengths, as (red, green, blue).
pub fn rgb_band_indices(grid: &BandGrid) -> (usize, usize, usize) {
    (
        grid.nearest_band(RED_NM),
        grid.nearest_band(GREEN_NM),
        grid.nearest_band(BLUE_NM),
    )
}

/// Compose an RGB image from the bands nearest the three composite
/// wavelengths, min-max stretching each channel to [0, 255]. A constant
/// channel maps to mid-gray.
pub fn render_rgb(cube: &HyperCube) -> Result<RgbImage> {
    if !cube.calibrated() {
        return Err(Error::Contract("cannot render an uncalibrated cube".into()));
    }
    let header = cube.header();
    let (r, g, b) = rgb_band_indices(header.grid());
    let (lines, samples) = (header.lines, header.samples);

    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(3);
    for band in [r, g, b] {
        let mut ch = Vec::with_capacity(lines * samples);
        for line in 0..lines {
            for sample in 0..samples {
                ch.push(cube.value(line, sample, band));
            }
        }
        channels.push(ch);
    }

    let mut pixels = vec![0u8; lines * samples * 3];
    for (c, ch) in channels.iter().enumerate() {
        let min = ch.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (i, &v) in ch.iter().enumerate() {
            let byte = if max > min {
                ((v - min) / (max - min) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                128
            };
            pixels[i * 3 + c] = byte;
        }
    }
    Ok(RgbImage {
        width: samples,
        height: lines,
        pixels,
    })
}
