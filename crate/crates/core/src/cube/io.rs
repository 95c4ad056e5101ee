//! Raw payload encoding/decoding for the three interleaves and two
//! element types. In-memory order is always (line, sample, band).

use super::{ByteOrder, CubeHeader, DataKind, HyperCube, Interleave};
use crate::error::{Error, Result};

/// Disk element order as (line, sample, band) triples.
fn disk_order(h: &CubeHeader) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    let (lines, samples, bands) = (h.lines, h.samples, h.bands());
    let interleave = h.interleave;
    (0..lines * samples * bands).map(move |k| match interleave {
        // line-major, then band, then sample
        Interleave::Bil => {
            let line = k / (bands * samples);
            let rem = k % (bands * samples);
            (line, rem % samples, rem / samples)
        }
        // line-major, then sample, then band
        Interleave::Bip => {
            let line = k / (samples * bands);
            let rem = k % (samples * bands);
            (line, rem / bands, rem % bands)
        }
        // band-major, then line, then sample
        Interleave::Bsq => {
            let band = k / (lines * samples);
            let rem = k % (lines * samples);
            (rem / samples, rem % samples, band)
        }
    })
}

/// Decode a raw payload laid out per the header. uint16 values are
/// promoted to f64 exactly.
pub fn read_cube(header: &CubeHeader, bytes: &[u8]) -> Result<HyperCube> {
    let expected = header.payload_len();
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let (samples, bands) = (header.samples, header.bands());
    let elem = header.data_kind.byte_size();
    let mut values = vec![0.0; header.lines * samples * bands];
    for (k, (line, sample, band)) in disk_order(header).enumerate() {
        let raw = &bytes[k * elem..(k + 1) * elem];
        let v = match (header.data_kind, header.byte_order) {
            (DataKind::Uint16, ByteOrder::Little) => {
                u16::from_le_bytes([raw[0], raw[1]]) as f64
            }
            (DataKind::Uint16, ByteOrder::Big) => u16::from_be_bytes([raw[0], raw[1]]) as f64,
            (DataKind::Float32, ByteOrder::Little) => {
                f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64
            }
            (DataKind::Float32, ByteOrder::Big) => {
                f32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64
            }
        };
        values[(line * samples + sample) * bands + band] = v;
    }
    HyperCube::from_values(header.clone(), values, false)
}

/// Encode a cube's values per its header layout. uint16 requires every
/// value to be integral and in range.
pub fn write_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    let header = cube.header();
    let mut out = Vec::with_capacity(header.payload_len());
    for (line, sample, band) in disk_order(header) {
        let v = cube.value(line, sample, band);
        match (header.data_kind, header.byte_order) {
            (DataKind::Uint16, order) => {
                if !(0.0..=65535.0).contains(&v) || v.fract() != 0.0 {
                    return Err(Error::Contract(format!(
                        "value {v} at ({line},{sample},{band}) is not a uint16"
                    )));
                }
                let u = v as u16;
                out.extend_from_slice(&match order {
                    ByteOrder::Little => u.to_le_bytes(),
                    ByteOrder::Big => u.to_be_bytes(),
                });
            }
            (DataKind::Float32, order) => {
                let f = v as f32;
                out.extend_from_slice(&match order {
                    ByteOrder::Little => f.to_le_bytes(),
                    ByteOrder::Big => f.to_be_bytes(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::test_header;
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn decodes_tiny_bil_uint16() {
        let h = test_header(
            1,
            1,
            2,
            Interleave::Bil,
            DataKind::Uint16,
            ByteOrder::Little,
        );
        let cube = read_cube(&h, &[0x01, 0x00, 0x02, 0x00]).unwrap();
        assert_eq!(cube.values(), &[1.0, 2.0]);
        assert!(!cube.calibrated());
    }

    #[test]
    fn truncated_payload_reports_counts() {
        let h = test_header(
            1,
            1,
            2,
            Interleave::Bil,
            DataKind::Uint16,
            ByteOrder::Little,
        );
        let err = read_cube(&h, &[0x01, 0x00, 0x02]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 4 bytes, got 3"), "{msg}");
    }

    #[test]
    fn interleaves_decode_to_identical_cubes() {
        // round-trip writer/reader oracle on a random 4x3x5 cube
        let mut rng = crate::seed::rng_for(31, 0);
        let values: Vec<f64> = (0..4 * 3 * 5).map(|_| rng.gen_range(0..=65535) as f64).collect();
        let mut decoded = Vec::new();
        for interleave in [Interleave::Bil, Interleave::Bip, Interleave::Bsq] {
            for order in [ByteOrder::Little, ByteOrder::Big] {
                let h = test_header(4, 3, 5, interleave, DataKind::Uint16, order);
                let cube = HyperCube::from_values(h.clone(), values.clone(), false).unwrap();
                let bytes = write_cube(&cube).unwrap();
                decoded.push(read_cube(&h, &bytes).unwrap().values().to_vec());
            }
        }
        for d in &decoded[1..] {
            assert_eq!(d, &decoded[0]);
        }
        assert_eq!(decoded[0], values);
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let mut rng = crate::seed::rng_for(32, 0);
        let values: Vec<f64> = (0..2 * 3 * 4)
            .map(|_| rng.gen_range(-1.0f32..2.0) as f64)
            .collect();
        let h = test_header(2, 3, 4, Interleave::Bsq, DataKind::Float32, ByteOrder::Big);
        let cube = HyperCube::from_values(h.clone(), values.clone(), false).unwrap();
        let back = read_cube(&h, &write_cube(&cube).unwrap()).unwrap();
        for (a, b) in values.iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn uint16_writer_rejects_unrepresentable_values() {
        let h = test_header(
            1,
            1,
            2,
            Interleave::Bip,
            DataKind::Uint16,
            ByteOrder::Little,
        );
        let cube = HyperCube::from_values(h, vec![1.5, 2.0], false).unwrap();
        assert!(write_cube(&cube).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_preserves_every_value(
            lines in 1usize..4,
            samples in 1usize..4,
            bands in 2usize..6,
            interleave_pick in 0u8..3,
            order_pick in 0u8..2,
            seed in any::<u64>(),
        ) {
            let interleave = [Interleave::Bil, Interleave::Bip, Interleave::Bsq][interleave_pick as usize];
            let order = [ByteOrder::Little, ByteOrder::Big][order_pick as usize];
            let mut rng = crate::seed::rng_for(seed, 1);
            let values: Vec<f64> = (0..lines * samples * bands)
                .map(|_| rng.gen_range(0..=65535) as f64)
                .collect();
            let h = test_header(lines, samples, bands, interleave, DataKind::Uint16, order);
            let cube = HyperCube::from_values(h.clone(), values.clone(), false).unwrap();
            let back = read_cube(&h, &write_cube(&cube).unwrap()).unwrap();
            prop_assert_eq!(back.values(), &values[..]);
        }
    }
}
