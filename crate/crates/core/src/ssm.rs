//! Desk-scale diagonal linear state-space model with the quantizer placed
//! on its input.
//!
//! ```text
//! h_t[i] = a[i] * h_{t-1}[i] + b[i] * x_t
//! y_t    = sum_i c[i] * h_t[i]
//! ```

use serde::{Deserialize, Serialize};

use crate::calibration::QuantConfig;
use crate::codec::{fake_quant, Quantizer};
use crate::error::{Error, Result};
use crate::metrics::QuantizerStats;
use crate::synth::NormalSampler;
use crate::tensor::FloatTensor;

/// Mixed into the seed so parameter and input streams differ for one seed.
const PARAM_STREAM_SALT: u64 = 0x5353_4D5F_5041_5241;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmParams {
    /// Per-channel decay `a`, `|a| < 1`.
    pub decay: Vec<f64>,
    /// Per-channel input gain `b`.
    pub input_gain: Vec<f64>,
    /// Per-channel output gain `c`.
    pub output_gain: Vec<f64>,
    pub initial_state: Vec<f64>,
}

impl SsmParams {
    pub fn new(decay: Vec<f64>, input_gain: Vec<f64>, output_gain: Vec<f64>) -> Result<Self> {
        let n = decay.len();
        let params = Self {
            decay,
            input_gain,
            output_gain,
            initial_state: vec![0.0; n],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_initial_state(mut self, h0: Vec<f64>) -> Result<Self> {
        self.initial_state = h0;
        self.validate()?;
        Ok(self)
    }

    /// Seeded parameters: decays uniform in `decay_range`, gains standard
    /// normal. Draw order: all decays, then `b`, then `c`.
    pub fn random(state_dim: usize, seed: u64, decay_range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = decay_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > -1.0 && hi < 1.0) {
            return Err(Error::InvalidParams(format!(
                "decay range [{lo}, {hi}] must lie inside (-1, 1)"
            )));
        }
        let mut sampler = NormalSampler::new(seed ^ PARAM_STREAM_SALT);
        let decay = (0..state_dim)
            .map(|_| lo + (hi - lo) * sampler.rng().next_f64())
            .collect();
        let input_gain = (0..state_dim).map(|_| sampler.standard()).collect();
        let output_gain = (0..state_dim).map(|_| sampler.standard()).collect();
        Self::new(decay, input_gain, output_gain)
    }

    pub fn state_dim(&self) -> usize {
        self.decay.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.decay.len();
        if n == 0 {
            return Err(Error::InvalidParams("state dimension must be >= 1".into()));
        }
        if self.input_gain.len() != n || self.output_gain.len() != n || self.initial_state.len() != n {
            return Err(Error::InvalidParams(format!(
                "coefficient lengths differ: a={n} b={} c={} h0={}",
                self.input_gain.len(),
                self.output_gain.len(),
                self.initial_state.len()
            )));
        }
        let all = self
            .decay
            .iter()
            .chain(&self.input_gain)
            .chain(&self.output_gain)
            .chain(&self.initial_state);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        if let Some(i) = self.decay.iter().position(|a| a.abs() >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "unstable channel {i}: |a| = {} >= 1",
                self.decay[i].abs()
            )));
        }
        Ok(())
    }

    /// `sum |c_i b_i| / (1 - max |a_i|)`: bound on `|y_t| / max |x|` from a
    /// zero initial state.
    pub fn bibo_gain(&self) -> f64 {
        let amax = self.decay.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let gain: f64 = self
            .input_gain
            .iter()
            .zip(&self.output_gain)
            .map(|(b, c)| (b * c).abs())
            .sum();
        gain / (1.0 - amax)
    }
}

pub fn ssm_forward(params: &SsmParams, x: &FloatTensor) -> Result<FloatTensor> {
    params.validate()?;
    if let Some(index) = x.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index: Some(index) });
    }
    let mut h = params.initial_state.clone();
    let mut y = Vec::with_capacity(x.len());
    for &xt in x.values() {
        let mut acc = 0.0;
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = params.decay[i] * *hi + params.input_gain[i] * xt;
            acc += params.output_gain[i] * *hi;
        }
        y.push(acc);
    }
    Ok(FloatTensor::new(y))
}

/// Runs the recurrence on the fake-quantized input; nothing else is
/// quantized.
pub fn ssm_forward_quantized(
    params: &SsmParams,
    x: &FloatTensor,
    cfg: &QuantConfig,
    which: Quantizer,
) -> Result<FloatTensor> {
    ssm_forward(params, &fake_quant(x, cfg, which)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagePair {
    pub soft_edge: QuantizerStats,
    pub int8: QuantizerStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmRunReport {
    pub seq_len: u64,
    pub state_dim: u64,
    pub config: QuantConfig,
    /// Quantized input vs. full-precision input.
    pub input: StagePair,
    /// Output of the quantized-input runs vs. the full-precision run.
    pub output: StagePair,
}

impl SsmRunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_report(params: &SsmParams, x: &FloatTensor, cfg: &QuantConfig) -> Result<SsmRunReport> {
    if x.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let reference = ssm_forward(params, x)?;
    let x_se = fake_quant(x, cfg, Quantizer::SoftEdge)?;
    let x_int8 = fake_quant(x, cfg, Quantizer::Int8)?;
    let y_se = ssm_forward(params, &x_se)?;
    let y_int8 = ssm_forward(params, &x_int8)?;
    Ok(SsmRunReport {
        seq_len: x.len() as u64,
        state_dim: params.state_dim() as u64,
        config: *cfg,
        input: StagePair {
            soft_edge: QuantizerStats::measure(x, &x_se)?,
            int8: QuantizerStats::measure(x, &x_int8)?,
        },
        output: StagePair {
            soft_edge: QuantizerStats::measure(&reference, &y_se)?,
            int8: QuantizerStats::measure(&reference, &y_int8)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, DistSpec};
    use proptest::prelude::*;

    fn scalar(a: f64, b: f64, c: f64) -> SsmParams {
        SsmParams::new(vec![a], vec![b], vec![c]).unwrap()
    }

    #[test]
    fn hand_recurrences() {
        let y = ssm_forward(&scalar(0.5, 1.0, 1.0), &FloatTensor::new(vec![1.0, 0.0])).unwrap();
        assert_eq!(y.values(), &[1.0, 0.5]);
        let y = ssm_forward(&scalar(0.0, 1.0, 2.0), &FloatTensor::new(vec![3.0])).unwrap();
        assert_eq!(y.values(), &[6.0]);
        let p = SsmParams::random(8, 3, (0.5, 0.99)).unwrap();
        let y = ssm_forward(&p, &FloatTensor::new(vec![0.0; 32])).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_state_decays() {
        let p = scalar(0.5, 1.0, 1.0).with_initial_state(vec![4.0]).unwrap();
        let y = ssm_forward(&p, &FloatTensor::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(y.values(), &[2.0, 1.0]);
    }

    #[test]
    fn quantized_outlier_run() {
        let cfg = QuantConfig::with_scale(1.0).unwrap();
        let p = scalar(0.0, 1.0, 1.0);
        let x = FloatTensor::new(vec![200.0]);
        let se = ssm_forward_quantized(&p, &x, &cfg, Quantizer::SoftEdge).unwrap();
        let base = ssm_forward_quantized(&p, &x, &cfg, Quantizer::Int8).unwrap();
        assert_eq!(se.values(), &[199.0]);
        assert_eq!(base.values(), &[127.0]);
    }

    #[test]
    fn medium_input_runs_agree() {
        let cfg = QuantConfig::with_scale(1.0).unwrap();
        let p = SsmParams::random(4, 11, (0.5, 0.99)).unwrap();
        let x: FloatTensor = (0..256).map(|i| if i % 2 == 0 { 16.0 + (i % 111) as f64 } else { -40.5 }).collect();
        let se = ssm_forward_quantized(&p, &x, &cfg, Quantizer::SoftEdge).unwrap();
        let base = ssm_forward_quantized(&p, &x, &cfg, Quantizer::Int8).unwrap();
        assert_eq!(se, base);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SsmParams::new(vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(SsmParams::new(vec![-1.5], vec![1.0], vec![1.0]).is_err());
        assert!(SsmParams::new(vec![0.5, 0.5], vec![1.0], vec![1.0]).is_err());
        assert!(SsmParams::new(vec![], vec![], vec![]).is_err());
        assert!(SsmParams::new(vec![0.5], vec![f64::NAN], vec![1.0]).is_err());
        assert!(SsmParams::random(4, 1, (0.5, 1.0)).is_err());
        let p = scalar(0.5, 1.0, 1.0);
        assert!(matches!(
            ssm_forward(&p, &FloatTensor::new(vec![1.0, f64::INFINITY])),
            Err(Error::NonFiniteInput { index: Some(1) })
        ));
    }

    #[test]
    fn random_params_in_range() {
        let p = SsmParams::random(64, 5, (0.5, 0.99)).unwrap();
        assert!(p.decay.iter().all(|a| (0.5..0.99).contains(a)));
        assert_eq!(p, SsmParams::random(64, 5, (0.5, 0.99)).unwrap());
    }

    #[test]
    fn report_prefers_soft_edge_on_outliers() {
        let x = generate(&DistSpec::outlier_mixture(4096, 1.0, 0.001, 10.0, 30.0, 7)).unwrap();
        let cfg = crate::calibration::calibrate(&x, 99.99, 4.0, 4.0).unwrap();
        let p = SsmParams::random(16, 7, (0.5, 0.99)).unwrap();
        let r = run_report(&p, &x, &cfg).unwrap();
        assert_eq!((r.seq_len, r.state_dim), (4096, 16));
        assert!(r.output.soft_edge.mse < r.output.int8.mse);
        assert!(r.input.soft_edge.mse < r.input.int8.mse);
    }

    proptest! {
        #[test]
        fn linear_in_input(
            seed in any::<u64>(),
            alpha in -100.0f64..100.0,
            x in prop::collection::vec(-10.0f64..10.0, 1..64),
        ) {
            let p = SsmParams::random(8, seed, (0.5, 0.99)).unwrap();
            let base = ssm_forward(&p, &FloatTensor::new(x.clone())).unwrap();
            let scaled = ssm_forward(&p, &x.iter().map(|v| alpha * v).collect()).unwrap();
            let norm = base.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for (s, b) in scaled.values().iter().zip(base.values()) {
                prop_assert!((s - alpha * b).abs() <= 1e-12 * alpha.abs().max(1.0) * norm);
            }
        }

        #[test]
        fn bounded_output(
            seed in any::<u64>(),
            x in prop::collection::vec(-50.0f64..50.0, 1..256),
        ) {
            let p = SsmParams::random(8, seed, (0.5, 0.99)).unwrap();
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let y = ssm_forward(&p, &FloatTensor::new(x)).unwrap();
            let bound = p.bibo_gain() * xmax * (1.0 + 1e-12);
            prop_assert!(y.values().iter().all(|v| v.abs() <= bound));
        }

        #[test]
        fn quantized_error_bounded(
            seed in any::<u64>(),
            x in prop::collection::vec(-400.0f64..400.0, 1..256),
        ) {
            let cfg = QuantConfig::with_scale(1.0).unwrap();
            let p = SsmParams::random(8, seed, (0.5, 0.99)).unwrap();
            let x = FloatTensor::new(x);
            let y = ssm_forward(&p, &x).unwrap();
            for which in [Quantizer::SoftEdge, Quantizer::Int8] {
                let xq = fake_quant(&x, &cfg, which).unwrap();
                let in_err = x.values().iter().zip(xq.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let yq = ssm_forward(&p, &xq).unwrap();
                let bound = p.bibo_gain() * in_err * (1.0 + 1e-9) + 1e-9;
                for (a, b) in y.values().iter().zip(yq.values()) {
                    prop_assert!((a - b).abs() <= bound);
                }
            }
        }
    }
}
