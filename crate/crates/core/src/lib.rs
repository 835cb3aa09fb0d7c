//! Soft-edge activation quantization.
//!
//! A three-scale quantizer for state-space-model activations: values below
//! a low threshold `L` use a fine step (`scale / 4`), values between `L` and
//! the clip point `H` use the standard INT8 grid, and values above `H` use a
//! coarse step (`scale * 4`) instead of being clipped. A per-element SE flag
//! marks the two special ranges, and bit 6 of the code byte tells them apart.
//!
//! The crate also provides percentile calibration, the single-scale INT8
//! baseline, error metrics, deterministic synthetic data, and a small linear
//! SSM that measures how input quantization error propagates.

pub mod calibration;
pub mod codec;
pub mod error;
pub mod metrics;
pub mod ssm;
pub mod synth;
pub mod tensor;
pub mod tensor_io;
pub mod trace;

pub use calibration::{calibrate, calibrate_scale, derive_config, percentile_abs, QuantConfig};
pub use codec::{
    classify, decode_tensor, encode_tensor, fake_quant, fake_quant_value, int8_decode, int8_encode,
    se_decode, se_decode_lenient, se_encode, QuantizedTensor, Quantizer, Region, SoftEdgeCode,
};
pub use error::{Error, Result};
pub use metrics::{
    compare_quantizers, mse, region_breakdown, sqnr_db, ComparisonReport, QuantizerStats,
    RegionStats,
};
pub use ssm::{run_report, ssm_forward, ssm_forward_quantized, SsmParams, SsmRunReport};
pub use synth::{generate, DistKind, DistSpec, SplitMix64};
pub use tensor::FloatTensor;
pub use tensor_io::{read_packed, read_tensor, write_packed, write_tensor};
pub use trace::{hardware_trace, TraceRecord};
