//! The soft-edge quantizer: three-way classification, encode/decode, the
//! single-scale INT8 baseline, and fake quantization.
//!
//! Code layout when the SE flag is set:
//!
//! ```text
//!   bit 7    bit 6     bits 5..0
//!   sign     region    magnitude m (0..=63)
//!   1 = neg  0 = small
//!            1 = large
//! ```
//!
//! With the flag clear the byte is a two's-complement INT8 in `[-127, 127]`.
//! The flag itself travels out of band as one bit per element.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibration::{QuantConfig, STANDARD_MAX_CODE};
use crate::error::{Error, Result};
use crate::tensor::FloatTensor;

pub const SIGN_BIT: u8 = 0x80;
pub const REGION_BIT: u8 = 0x40;
pub const MAGNITUDE_MASK: u8 = 0x3F;
pub const MAX_SPECIAL_MAGNITUDE: u8 = 63;
pub const MAX_STANDARD_CODE: i8 = 127;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Small,
    Medium,
    Large,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Small, Region::Medium, Region::Large];

    pub fn name(self) -> &'static str {
        match self {
            Region::Small => "small",
            Region::Medium => "medium",
            Region::Large => "large",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Small => "Small",
            Region::Medium => "Medium",
            Region::Large => "Large",
        })
    }
}

/// Which quantizer a fake-quant pass simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantizer {
    SoftEdge,
    Int8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SoftEdgeCode {
    pub se_flag: bool,
    pub byte: u8,
}

impl SoftEdgeCode {
    pub fn standard(code: i8) -> Self {
        Self {
            se_flag: false,
            byte: code as u8,
        }
    }

    /// Special-range code. `magnitude` is truncated to 6 bits.
    pub fn special(negative: bool, large: bool, magnitude: u8) -> Self {
        let mut byte = magnitude & MAGNITUDE_MASK;
        if negative {
            byte |= SIGN_BIT;
        }
        if large {
            byte |= REGION_BIT;
        }
        Self { se_flag: true, byte }
    }

    pub fn sign_bit(self) -> bool {
        self.byte & SIGN_BIT != 0
    }

    pub fn region_bit(self) -> bool {
        self.byte & REGION_BIT != 0
    }

    pub fn magnitude(self) -> u8 {
        self.byte & MAGNITUDE_MASK
    }

    pub fn as_i8(self) -> i8 {
        self.byte as i8
    }

    /// Region this code reconstructs into.
    pub fn region(self) -> Region {
        match (self.se_flag, self.region_bit()) {
            (false, _) => Region::Medium,
            (true, false) => Region::Small,
            (true, true) => Region::Large,
        }
    }

    /// False for the two patterns the encoder never emits: INT8 `-128` and
    /// small-region negative zero.
    pub fn is_canonical(self) -> bool {
        if self.se_flag {
            !(self.sign_bit() && !self.region_bit() && self.magnitude() == 0)
        } else {
            self.as_i8() != i8::MIN
        }
    }
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFiniteInput { index: None })
    }
}

/// Round half away from zero, then saturate to `[0, 63]`.
fn special_magnitude(units: f64) -> u8 {
    units.round().clamp(0.0, f64::from(MAX_SPECIAL_MAGNITUDE)) as u8
}

fn standard_code(x: f64, scale: f64) -> i8 {
    (x / scale).round().clamp(-STANDARD_MAX_CODE, STANDARD_MAX_CODE) as i8
}

/// `|x| < L` is small, `|x| > H` is large, both thresholds inclusive to
/// medium.
pub fn classify(x: f64, cfg: &QuantConfig) -> Result<Region> {
    let mag = finite(x)?.abs();
    Ok(if mag < cfg.low_threshold {
        Region::Small
    } else if mag <= cfg.high_threshold {
        Region::Medium
    } else {
        Region::Large
    })
}

pub fn se_encode(x: f64, cfg: &QuantConfig) -> Result<SoftEdgeCode> {
    let region = classify(x, cfg)?;
    let negative = x < 0.0;
    Ok(match region {
        Region::Small => {
            let m = special_magnitude(x.abs() / cfg.fine_step());
            SoftEdgeCode::special(negative && m != 0, false, m)
        }
        Region::Medium => SoftEdgeCode::standard(standard_code(x, cfg.scale)),
        Region::Large => {
            let m = special_magnitude((x.abs() - cfg.high_threshold) / cfg.coarse_step());
            SoftEdgeCode::special(negative, true, m)
        }
    })
}

/// Decodes a code, rejecting small-region negative zero.
pub fn se_decode(code: SoftEdgeCode, cfg: &QuantConfig) -> Result<f64> {
    if code.se_flag && code.sign_bit() && !code.region_bit() && code.magnitude() == 0 {
        return Err(Error::NonCanonicalCode { index: 0 });
    }
    Ok(se_decode_lenient(code, cfg))
}

/// Decodes any bit pattern. Negative zero reads as `0.0` and INT8 `-128`
/// as `-128 * scale`.
pub fn se_decode_lenient(code: SoftEdgeCode, cfg: &QuantConfig) -> f64 {
    if !code.se_flag {
        return f64::from(code.as_i8()) * cfg.scale;
    }
    let m = f64::from(code.magnitude());
    let mag = if code.region_bit() {
        cfg.high_threshold + m * cfg.coarse_step()
    } else {
        m * cfg.fine_step()
    };
    if code.sign_bit() && mag != 0.0 {
        -mag
    } else {
        mag
    }
}

/// Single-scale baseline: `clamp(round(x / s), -127, 127)`.
pub fn int8_encode(x: f64, cfg: &QuantConfig) -> Result<i8> {
    Ok(standard_code(finite(x)?, cfg.scale))
}

pub fn int8_decode(code: i8, cfg: &QuantConfig) -> f64 {
    f64::from(code) * cfg.scale
}

/// Quantize then dequantize one value, returning the binary32 result.
pub fn fake_quant_value(x: f64, cfg: &QuantConfig, which: Quantizer) -> Result<f64> {
    let recon = match which {
        Quantizer::SoftEdge => se_decode_lenient(se_encode(x, cfg)?, cfg),
        Quantizer::Int8 => int8_decode(int8_encode(x, cfg)?, cfg),
    };
    Ok(f64::from(recon as f32))
}

pub fn fake_quant(t: &FloatTensor, cfg: &QuantConfig, which: Quantizer) -> Result<FloatTensor> {
    t.values()
        .iter()
        .enumerate()
        .map(|(i, &x)| fake_quant_value(x, cfg, which).map_err(|e| e.at(i)))
        .collect()
}

/// Packed soft-edge codes: an SE-flag bitmap (LSB first) and one byte per
/// element.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    config: QuantConfig,
    len: usize,
    flags: Vec<u8>,
    codes: Vec<u8>,
}

pub(crate) fn bitmap_len(n: usize) -> usize {
    n.div_ceil(8)
}

impl QuantizedTensor {
    pub fn empty(config: QuantConfig) -> Self {
        Self {
            config,
            len: 0,
            flags: Vec::new(),
            codes: Vec::new(),
        }
    }

    /// Assembles a tensor from a packed bitmap and code bytes.
    pub fn from_parts(config: QuantConfig, flags: Vec<u8>, codes: Vec<u8>) -> Result<Self> {
        config.validate()?;
        let len = codes.len();
        if flags.len() != bitmap_len(len) {
            return Err(Error::LengthMismatch {
                left: flags.len(),
                right: bitmap_len(len),
            });
        }
        if len % 8 != 0 {
            let used = (len % 8) as u32;
            if flags[flags.len() - 1] >> used != 0 {
                return Err(Error::NonZeroPadding);
            }
        }
        Ok(Self {
            config,
            len,
            flags,
            codes,
        })
    }

    pub fn from_codes(config: QuantConfig, codes: &[SoftEdgeCode]) -> Result<Self> {
        let mut q = Self::empty(config);
        q.flags = vec![0; bitmap_len(codes.len())];
        for c in codes {
            q.push(*c);
        }
        config.validate()?;
        Ok(q)
    }

    fn push(&mut self, code: SoftEdgeCode) {
        let i = self.len;
        if code.se_flag {
            self.flags[i / 8] |= 1 << (i % 8);
        }
        self.codes.push(code.byte);
        self.len += 1;
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flag_bitmap(&self) -> &[u8] {
        &self.flags
    }

    pub fn code_bytes(&self) -> &[u8] {
        &self.codes
    }

    pub fn code(&self, i: usize) -> SoftEdgeCode {
        SoftEdgeCode {
            se_flag: self.flags[i / 8] >> (i % 8) & 1 == 1,
            byte: self.codes[i],
        }
    }

    pub fn codes(&self) -> impl Iterator<Item = SoftEdgeCode> + '_ {
        (0..self.len).map(|i| self.code(i))
    }
}

pub fn encode_tensor(t: &FloatTensor, cfg: &QuantConfig) -> Result<QuantizedTensor> {
    cfg.validate()?;
    let mut q = QuantizedTensor::empty(*cfg);
    q.flags = vec![0; bitmap_len(t.len())];
    q.codes.reserve(t.len());
    for (i, &x) in t.values().iter().enumerate() {
        q.push(se_encode(x, cfg).map_err(|e| e.at(i))?);
    }
    Ok(q)
}

/// Strict element-wise decode in binary64.
pub fn decode_tensor(q: &QuantizedTensor) -> Result<FloatTensor> {
    q.codes()
        .enumerate()
        .map(|(i, c)| se_decode(c, &q.config).map_err(|e| e.at(i)))
        .collect()
}
