//! Cycle-free behavioral model of the soft-edge quantizer datapath.
//!
//! The model walks the value through the same stages a hardware
//! implementation would (threshold comparators, step mux, offset
//! subtract, round/saturate, byte assembly, decode) and records every
//! intermediate signal. Its encoding is computed independently of
//! [`se_encode`] and cross-checked against it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibration::QuantConfig;
use crate::codec::{
    se_decode, se_encode, Region, SoftEdgeCode, MAX_SPECIAL_MAGNITUDE, MAX_STANDARD_CODE,
    REGION_BIT, SIGN_BIT,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub input: f64,
    /// Comparator output `|x| < L`.
    pub below_low: bool,
    /// Comparator output `|x| > H`.
    pub above_high: bool,
    pub region: Region,
    pub selected_step: f64,
    /// Offset subtracted before dividing by the step (`H` for large values).
    pub offset: f64,
    /// Quotient before rounding.
    pub quotient: f64,
    /// Rounded quotient before saturation.
    pub rounded: f64,
    pub saturated: bool,
    pub se_flag: bool,
    pub sign_bit: bool,
    pub region_bit: bool,
    /// Low 6 bits for special codes, the full two's-complement code otherwise.
    pub magnitude: i16,
    pub byte: u8,
    pub reconstructed: f64,
    pub abs_error: f64,
}

impl TraceRecord {
    pub fn code(&self) -> SoftEdgeCode {
        SoftEdgeCode {
            se_flag: self.se_flag,
            byte: self.byte,
        }
    }
}

impl fmt::Display for TraceRecord {
    /// `region=<R> step=<s> flag=<0|1> byte=0x<hh> recon=<v> err=<e>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "region={} step={} flag={} byte=0x{:02x} recon={} err={}",
            self.region,
            self.selected_step,
            u8::from(self.se_flag),
            self.byte,
            self.reconstructed,
            self.abs_error
        )
    }
}

pub fn hardware_trace(x: f64, cfg: &QuantConfig) -> Result<TraceRecord> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput { index: None });
    }
    let mag = x.abs();
    let below_low = mag < cfg.low_threshold;
    let above_high = mag > cfg.high_threshold;
    let se_flag = below_low || above_high;
    let region = match (below_low, above_high) {
        (true, _) => Region::Small,
        (false, true) => Region::Large,
        (false, false) => Region::Medium,
    };

    let (selected_step, offset) = match region {
        Region::Small => (cfg.scale / cfg.fine_divisor, 0.0),
        Region::Medium => (cfg.scale, 0.0),
        Region::Large => (cfg.scale * cfg.coarse_multiplier, cfg.high_threshold),
    };

    // The standard path keeps the sign in two's complement; special paths
    // work on the magnitude and carry the sign separately.
    let quotient = if se_flag {
        (mag - offset) / selected_step
    } else {
        x / selected_step
    };
    let rounded = quotient.round();
    let limit = if se_flag {
        f64::from(MAX_SPECIAL_MAGNITUDE)
    } else {
        f64::from(MAX_STANDARD_CODE)
    };
    let lower = if se_flag { 0.0 } else { -limit };
    let clamped = rounded.clamp(lower, limit);
    let saturated = clamped != rounded;

    let (byte, sign_bit, region_bit, magnitude) = if se_flag {
        let m = clamped as u8;
        let sign_bit = x < 0.0 && !(region == Region::Small && m == 0);
        let mut byte = m;
        if sign_bit {
            byte |= SIGN_BIT;
        }
        if above_high {
            byte |= REGION_BIT;
        }
        (byte, sign_bit, above_high, i16::from(m))
    } else {
        let k = clamped as i8;
        (k as u8, k < 0, false, i16::from(k))
    };

    let code = SoftEdgeCode { se_flag, byte };
    let reconstructed = se_decode(code, cfg)?;
    let reference = se_encode(x, cfg)?;
    if reference != code {
        return Err(Error::Invariant(format!(
            "datapath code {code:?} disagrees with encoder {reference:?} for x = {x}"
        )));
    }

    Ok(TraceRecord {
        input: x,
        below_low,
        above_high,
        region,
        selected_step,
        offset,
        quotient,
        rounded,
        saturated,
        se_flag,
        sign_bit,
        region_bit,
        magnitude,
        byte,
        reconstructed,
        abs_error: (x - reconstructed).abs(),
    })
}
