//! Binary file formats. All integers and floats are little-endian.
//!
//! `QSEF` float tensor:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `QSEF`                  |
//! | 4      | 1    | version `0x01`                |
//! | 5      | 3    | reserved, zero                |
//! | 8      | 8    | element count `n` (u64)       |
//! | 16     | 4n   | binary32 values               |
//!
//! `QSE1` packed soft-edge tensor:
//!
//! | offset | size      | field                                      |
//! |--------|-----------|--------------------------------------------|
//! | 0      | 4         | magic `QSE1`                               |
//! | 4      | 1         | version `0x01`                             |
//! | 5      | 3         | reserved, zero                             |
//! | 8      | 8         | element count `n` (u64)                    |
//! | 16     | 40        | scale, L, H, fine_divisor, coarse_multiplier (binary64) |
//! | 56     | ceil(n/8) | SE flags, element `i` at byte `i/8` bit `i%8` |
//! | ...    | n         | code bytes                                 |
//!
//! Calibration metadata (`percentile`, `calib_count`) is not stored in
//! `QSE1`; reads report `percentile = 100` and `calib_count = 0`.

use std::fs;
use std::path::Path;

use crate::calibration::QuantConfig;
use crate::codec::{bitmap_len, QuantizedTensor};
use crate::error::{Error, Result};
use crate::tensor::FloatTensor;

pub const FLOAT_MAGIC: [u8; 4] = *b"QSEF";
pub const PACKED_MAGIC: [u8; 4] = *b"QSE1";
pub const FORMAT_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 16;
pub const PACKED_CONFIG_LEN: usize = 40;

fn write_header(out: &mut Vec<u8>, magic: [u8; 4], n: usize) {
    out.extend_from_slice(&magic);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(n as u64).to_le_bytes());
}

/// Validates magic, version and reserved bytes; returns the element count.
fn read_header(bytes: &[u8], magic: [u8; 4]) -> Result<u64> {
    if bytes.len() >= 4 && bytes[..4] != magic {
        let mut found = [0; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(Error::BadMagic { expected: magic, found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: bytes[4],
        });
    }
    if bytes[5..8] != [0; 3] {
        return Err(Error::ReservedBytes);
    }
    Ok(u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")))
}

fn check_total(found: usize, expected: Option<u64>) -> Result<()> {
    match expected {
        Some(e) if e == found as u64 => Ok(()),
        Some(e) => Err(Error::TruncatedPayload {
            expected: e,
            found: found as u64,
        }),
        None => Err(Error::TruncatedPayload {
            expected: u64::MAX,
            found: found as u64,
        }),
    }
}

pub fn encode_float_tensor(t: &FloatTensor) -> Result<Vec<u8>> {
    let values = t.to_f32()?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    write_header(&mut out, FLOAT_MAGIC, values.len());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_float_tensor(bytes: &[u8]) -> Result<FloatTensor> {
    let n = read_header(bytes, FLOAT_MAGIC)?;
    let expected = n.checked_mul(4).and_then(|p| p.checked_add(HEADER_LEN as u64));
    check_total(bytes.len(), expected)?;
    let mut values = Vec::with_capacity(n as usize);
    for (index, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { index });
        }
        values.push(f64::from(v));
    }
    Ok(FloatTensor::new(values))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FloatTensor> {
    decode_float_tensor(&fs::read(path)?)
}

/// Writes `t` as QSEF and returns the number of bytes written.
pub fn write_tensor(path: impl AsRef<Path>, t: &FloatTensor) -> Result<u64> {
    let bytes = encode_float_tensor(t)?;
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn encode_packed(q: &QuantizedTensor) -> Vec<u8> {
    let n = q.len();
    let mut out = Vec::with_capacity(HEADER_LEN + PACKED_CONFIG_LEN + bitmap_len(n) + n);
    write_header(&mut out, PACKED_MAGIC, n);
    let c = q.config();
    for field in [
        c.scale,
        c.low_threshold,
        c.high_threshold,
        c.fine_divisor,
        c.coarse_multiplier,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    out.extend_from_slice(q.flag_bitmap());
    out.extend_from_slice(q.code_bytes());
    out
}

pub fn decode_packed(bytes: &[u8]) -> Result<QuantizedTensor> {
    let n = read_header(bytes, PACKED_MAGIC)?;
    let fixed = (HEADER_LEN + PACKED_CONFIG_LEN) as u64;
    let expected = n
        .checked_add(n.div_ceil(8))
        .and_then(|p| p.checked_add(fixed));
    check_total(bytes.len(), expected)?;

    let field = |i: usize| {
        let at = HEADER_LEN + 8 * i;
        f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
    };
    let config = QuantConfig {
        scale: field(0),
        low_threshold: field(1),
        high_threshold: field(2),
        fine_divisor: field(3),
        coarse_multiplier: field(4),
        percentile: 100.0,
        calib_count: 0,
    };
    config.validate()?;

    let n = n as usize;
    let flags_at = HEADER_LEN + PACKED_CONFIG_LEN;
    let codes_at = flags_at + bitmap_len(n);
    QuantizedTensor::from_parts(
        config,
        bytes[flags_at..codes_at].to_vec(),
        bytes[codes_at..].to_vec(),
    )
}

pub fn read_packed(path: impl AsRef<Path>) -> Result<QuantizedTensor> {
    decode_packed(&fs::read(path)?)
}

pub fn write_packed(path: impl AsRef<Path>, q: &QuantizedTensor) -> Result<u64> {
    let bytes = encode_packed(q);
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}
