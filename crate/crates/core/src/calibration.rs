//! Offline calibration: percentile clipping of calibration activations and
//! derivation of the soft-edge thresholds from the resulting scale.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FloatTensor;

/// Largest standard INT8 code magnitude; the clip point maps here.
pub const STANDARD_MAX_CODE: f64 = 127.0;
/// Number of fine steps covered by the small region (6-bit payload + 1).
pub const SMALL_REGION_STEPS: f64 = 64.0;
pub const DEFAULT_FINE_DIVISOR: f64 = 4.0;
pub const DEFAULT_COARSE_MULTIPLIER: f64 = 4.0;

/// Calibrated scale and soft-edge thresholds, stored offline and embedded
/// in packed quantized files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    /// Activation units per standard code step.
    pub scale: f64,
    /// `L`: magnitudes strictly below this use the fine step.
    pub low_threshold: f64,
    /// `H`: magnitudes strictly above this use the coarse step.
    pub high_threshold: f64,
    pub fine_divisor: f64,
    pub coarse_multiplier: f64,
    /// Percentile the scale was calibrated at (metadata only).
    pub percentile: f64,
    /// Number of calibration elements (metadata only).
    pub calib_count: u64,
}

impl QuantConfig {
    /// Config with default divisor/multiplier and no calibration metadata.
    pub fn with_scale(scale: f64) -> Result<Self> {
        derive_config(
            scale,
            DEFAULT_FINE_DIVISOR,
            DEFAULT_COARSE_MULTIPLIER,
            100.0,
            0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.scale,
            self.low_threshold,
            self.high_threshold,
            self.fine_divisor,
            self.coarse_multiplier,
            self.percentile,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidConfig("non-finite field".into()));
        }
        if self.scale <= 0.0 {
            return Err(Error::InvalidConfig(format!("scale {} must be > 0", self.scale)));
        }
        if self.low_threshold <= 0.0 || self.low_threshold >= self.high_threshold {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 < L < H (L = {}, H = {})",
                self.low_threshold, self.high_threshold
            )));
        }
        if self.fine_divisor < 1.0 || self.coarse_multiplier < 1.0 {
            return Err(Error::InvalidConfig(
                "fine_divisor and coarse_multiplier must be >= 1".into(),
            ));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile {} outside (0, 100]",
                self.percentile
            )));
        }
        Ok(())
    }

    /// Step used in the small region.
    pub fn fine_step(&self) -> f64 {
        self.scale / self.fine_divisor
    }

    /// Step used in the large region.
    pub fn coarse_step(&self) -> f64 {
        self.scale * self.coarse_multiplier
    }

    /// Largest magnitude the soft-edge codebook can reconstruct.
    pub fn saturation(&self) -> f64 {
        self.high_threshold + 63.0 * self.coarse_step()
    }

    /// Same codebook expressed in units multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            low_threshold: self.low_threshold * factor,
            high_threshold: self.high_threshold * factor,
            ..*self
        }
    }

    /// True when two configs describe the same codebook, ignoring metadata.
    pub fn same_codebook(&self, other: &Self) -> bool {
        self.scale.to_bits() == other.scale.to_bits()
            && self.low_threshold.to_bits() == other.low_threshold.to_bits()
            && self.high_threshold.to_bits() == other.high_threshold.to_bits()
            && self.fine_divisor.to_bits() == other.fine_divisor.to_bits()
            && self.coarse_multiplier.to_bits() == other.coarse_multiplier.to_bits()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("malformed config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// The `p`-th percentile of `|values|`, linearly interpolated between the
/// closest order statistics.
pub fn percentile_abs(t: &FloatTensor, p: f64) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::EmptyTensor);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::PercentileOutOfRange(p));
    }
    let mut mags = Vec::with_capacity(t.len());
    for (index, v) in t.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { index: Some(index) });
        }
        mags.push(v.abs());
    }

    let n = mags.len();
    let rank = (p / 100.0) * (n - 1) as f64;
    let lo_idx = (rank.floor() as usize).min(n - 1);
    let frac = rank - lo_idx as f64;

    let (_, lo, upper) = mags.select_nth_unstable_by(lo_idx, f64::total_cmp);
    let lo = *lo;
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo);
    }
    let hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lo + frac * (hi - lo))
}

/// Scale that maps the `p`-th percentile of `|values|` onto code 127.
///
/// The result is rounded to the nearest binary32 value so the stored scale
/// is exactly representable by an FP32 datapath.
pub fn calibrate_scale(t: &FloatTensor, p: f64) -> Result<f64> {
    let clip = percentile_abs(t, p)?;
    if clip == 0.0 {
        return Err(Error::DegenerateRange);
    }
    let scale = f64::from((clip / STANDARD_MAX_CODE) as f32);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateRange);
    }
    Ok(scale)
}

/// Builds a config from a scale: `L = 64 * scale / fine_divisor`,
/// `H = 127 * scale`.
pub fn derive_config(
    scale: f64,
    fine_divisor: f64,
    coarse_multiplier: f64,
    percentile: f64,
    calib_count: u64,
) -> Result<QuantConfig> {
    let cfg = QuantConfig {
        scale,
        low_threshold: SMALL_REGION_STEPS * (scale / fine_divisor),
        high_threshold: STANDARD_MAX_CODE * scale,
        fine_divisor,
        coarse_multiplier,
        percentile,
        calib_count,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Calibrates a scale at percentile `p` and derives the full config.
pub fn calibrate(
    t: &FloatTensor,
    p: f64,
    fine_divisor: f64,
    coarse_multiplier: f64,
) -> Result<QuantConfig> {
    let scale = calibrate_scale(t, p)?;
    derive_config(scale, fine_divisor, coarse_multiplier, p, t.len() as u64)
}
