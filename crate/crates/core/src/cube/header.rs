//! Plain-text cube header: one `key = value` per line.
//!
//! Keys: samples, lines, bands, interleave (bil|bip|bsq), data type
//! (12 = uint16, 4 = float32), byte order (0 = little, 1 = big),
//! wavelength = {comma-separated nm}. Unknown keys are ignored.

use super::{ByteOrder, CubeHeader, DataKind, Interleave};
use crate::error::{Error, Result};
use crate::grid::BandGrid;
use std::collections::HashMap;

pub fn parse_header(text: &str) -> Result<CubeHeader> {
    let mut fields: HashMap<String, (String, usize)> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "line {}: expected `key = value`, got {line:?}",
                lineno + 1
            )));
        };
        fields.insert(
            key.trim().to_ascii_lowercase(),
            (value.trim().to_string(), lineno + 1),
        );
    }

    let take = |key: &str| -> Result<(String, usize)> {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("missing key: {key}")))
    };
    let parse_count = |key: &str| -> Result<usize> {
        let (v, lineno) = take(key)?;
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad {key}: {v:?}")))?;
        if n == 0 {
            return Err(Error::Parse(format!("line {lineno}: {key} must be >= 1")));
        }
        Ok(n)
    };

    let samples = parse_count("samples")?;
    let lines = parse_count("lines")?;
    let bands = parse_count("bands")?;

    let (ileave, ileave_line) = take("interleave")?;
    let interleave: Interleave = ileave
        .parse()
        .map_err(|e| Error::Parse(format!("line {ileave_line}: {e}")))?;

    let (dt, dt_line) = take("data type")?;
    let code: u32 = dt
        .parse()
        .map_err(|_| Error::Parse(format!("line {dt_line}: bad data type: {dt:?}")))?;
    let data_kind =
        DataKind::from_code(code).map_err(|e| Error::Parse(format!("line {dt_line}: {e}")))?;

    let (bo, bo_line) = take("byte order")?;
    let bo_code: u32 = bo
        .parse()
        .map_err(|_| Error::Parse(format!("line {bo_line}: bad byte order: {bo:?}")))?;
    let byte_order =
        ByteOrder::from_code(bo_code).map_err(|e| Error::Parse(format!("line {bo_line}: {e}")))?;

    let (wl_text, wl_line) = take("wavelength")?;
    let inner = wl_text
        .trim()
        .trim_start_matches('{')
        .trim_end_matches('}');
    let wavelengths: Vec<f64> = inner
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {wl_line}: bad wavelength: {s:?}")))
        })
        .collect::<Result<_>>()?;
    if wavelengths.len() != bands {
        return Err(Error::Parse(format!(
            "bands = {bands} but wavelength lists {} values",
            wavelengths.len()
        )));
    }
    let grid = BandGrid::new(wavelengths)?;
    CubeHeader::new(lines, samples, interleave, data_kind, byte_order, grid)
}

/// Render a header back to the text format `parse_header` accepts.
pub fn format_header(h: &CubeHeader) -> String {
    let interleave = match h.interleave {
        Interleave::Bil => "bil",
        Interleave::Bip => "bip",
        Interleave::Bsq => "bsq",
    };
    let wl: Vec<String> = h.grid().wavelengths().iter().map(|w| format!("{w}")).collect();
    format!(
        "samples = {}\nlines = {}\nbands = {}\ninterleave = {}\ndata type = {}\nbyte order = {}\nwavelength = {{{}}}\n",
        h.samples,
        h.lines,
        h.bands(),
        interleave,
        h.data_kind.code(),
        h.byte_order.code(),
        wl.join(", ")
    )
}
