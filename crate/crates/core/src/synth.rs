//! Deterministic synthetic activation generators.
//!
//! Every stream is driven by [`SplitMix64`] and all transcendental functions
//! come from `libm`, so a given spec produces the same bits on every
//! platform.
//!
//! Draw order per element:
//! - gaussian: one standard normal (Box–Muller pairs, cosine output first)
//! - outlier mixture: one uniform `u`; if `u < f`, a uniform magnitude then
//!   one `u64` whose top bit is the sign; otherwise one standard normal
//! - student-t: one standard normal, then a chi-square via Marsaglia–Tsang
//! - lognormal: one standard normal, exponentiated

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FloatTensor;

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then the Stafford "Mix13"
/// finalizer on the new state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    pub fn next_f64_open0(&mut self) -> f64 {
        1.0 - self.next_f64()
    }
}

/// Box–Muller normal sampler; both outputs of each pair are consumed.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn rng(&mut self) -> &mut SplitMix64 {
        &mut self.rng
    }

    pub fn standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_f64_open0();
        let u2 = self.rng.next_f64();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(theta));
        radius * libm::cos(theta)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard()
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang, with the `shape < 1` boost.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let boosted = self.gamma(shape + 1.0);
            let u = self.rng.next_f64_open0();
            return boosted * libm::pow(u, 1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / libm::sqrt(9.0 * d);
        loop {
            let z = self.standard();
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.rng.next_f64_open0();
            if libm::log(u) < 0.5 * z * z + d - d * v + d * libm::log(v) {
                return d * v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Gaussian,
    OutlierMixture,
    StudentT,
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub kind: DistKind,
    pub mean: f64,
    pub std: f64,
    /// Probability that an element of the mixture is an outlier.
    pub outlier_fraction: f64,
    pub outlier_low: f64,
    pub outlier_high: f64,
    pub degrees_of_freedom: f64,
    pub n: usize,
    pub seed: u64,
}

impl DistSpec {
    pub fn gaussian(n: usize, mean: f64, std: f64, seed: u64) -> Self {
        Self {
            kind: DistKind::Gaussian,
            mean,
            std,
            outlier_fraction: 0.0,
            outlier_low: 10.0,
            outlier_high: 30.0,
            degrees_of_freedom: 3.0,
            n,
            seed,
        }
    }

    /// Zero-mean Gaussian body of width `std` with a fraction `fraction` of
    /// outliers whose magnitude is uniform in `[low, high]`.
    pub fn outlier_mixture(n: usize, std: f64, fraction: f64, low: f64, high: f64, seed: u64) -> Self {
        Self {
            kind: DistKind::OutlierMixture,
            outlier_fraction: fraction,
            outlier_low: low,
            outlier_high: high,
            ..Self::gaussian(n, 0.0, std, seed)
        }
    }

    pub fn student_t(n: usize, mean: f64, std: f64, dof: f64, seed: u64) -> Self {
        Self {
            kind: DistKind::StudentT,
            degrees_of_freedom: dof,
            ..Self::gaussian(n, mean, std, seed)
        }
    }

    /// `exp(N(mean, std))`.
    pub fn lognormal(n: usize, mean: f64, std: f64, seed: u64) -> Self {
        Self {
            kind: DistKind::Lognormal,
            ..Self::gaussian(n, mean, std, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.into()));
        if !self.mean.is_finite() {
            return bad("mean must be finite");
        }
        if !(self.std.is_finite() && self.std > 0.0) {
            return bad("std must be > 0");
        }
        if self.kind == DistKind::OutlierMixture {
            if !(0.0..1.0).contains(&self.outlier_fraction) {
                return bad("outlier_fraction must lie in [0, 1)");
            }
            if !(self.outlier_low.is_finite()
                && self.outlier_high.is_finite()
                && self.outlier_low >= 0.0
                && self.outlier_low < self.outlier_high)
            {
                return bad("outlier range must satisfy 0 <= low < high");
            }
        }
        if self.kind == DistKind::StudentT
            && !(self.degrees_of_freedom.is_finite() && self.degrees_of_freedom > 0.0)
        {
            return bad("degrees_of_freedom must be > 0");
        }
        Ok(())
    }
}

pub fn generate(spec: &DistSpec) -> Result<FloatTensor> {
    spec.validate()?;
    let mut sampler = NormalSampler::new(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    match spec.kind {
        DistKind::Gaussian => {
            for _ in 0..spec.n {
                out.push(sampler.normal(spec.mean, spec.std));
            }
        }
        DistKind::OutlierMixture => {
            let width = spec.outlier_high - spec.outlier_low;
            for _ in 0..spec.n {
                let u = sampler.rng().next_f64();
                let v = if u < spec.outlier_fraction {
                    let mag = spec.outlier_low + width * sampler.rng().next_f64();
                    if sampler.rng().next_u64() >> 63 == 1 {
                        -mag
                    } else {
                        mag
                    }
                } else {
                    sampler.normal(spec.mean, spec.std)
                };
                out.push(v);
            }
        }
        DistKind::StudentT => {
            let dof = spec.degrees_of_freedom;
            for _ in 0..spec.n {
                let z = sampler.standard();
                let chi2 = 2.0 * sampler.gamma(dof / 2.0);
                out.push(spec.mean + spec.std * z / libm::sqrt(chi2 / dof));
            }
        }
        DistKind::Lognormal => {
            for _ in 0..spec.n {
                out.push(libm::exp(sampler.normal(spec.mean, spec.std)));
            }
        }
    }
    Ok(FloatTensor::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_stream() {
        // Published SplitMix64 outputs for seed 1234567.
        let mut r = SplitMix64::new(1234567);
        let expected = [
            6457827717110365317u64,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ];
        for e in expected {
            assert_eq!(r.next_u64(), e);
        }
    }

    #[test]
    fn uniform_range() {
        let mut r = SplitMix64::new(3);
        for _ in 0..10_000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
            let v = r.next_f64_open0();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn empty_spec() {
        assert!(generate(&DistSpec::gaussian(0, 0.0, 1.0, 1)).unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        for spec in [
            DistSpec::gaussian(1000, 0.0, 1.0, 9),
            DistSpec::outlier_mixture(1000, 1.0, 0.01, 10.0, 30.0, 9),
            DistSpec::student_t(1000, 0.0, 1.0, 3.0, 9),
            DistSpec::lognormal(1000, 0.0, 0.5, 9),
        ] {
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            let bits = |t: &FloatTensor| t.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert!(a.values().iter().all(|v| v.is_finite()));
        }
        let a = generate(&DistSpec::gaussian(10, 0.0, 1.0, 1)).unwrap();
        let b = generate(&DistSpec::gaussian(10, 0.0, 1.0, 2)).unwrap();
        assert_ne!(a, b);
    }

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn gaussian_moments() {
        let t = generate(&DistSpec::gaussian(1_000_000, 0.0, 1.0, 42)).unwrap();
        let (mean, std) = mean_std(t.values());
        assert!(mean.abs() <= 0.005, "mean {mean}");
        assert!((std - 1.0).abs() <= 0.005, "std {std}");
    }

    #[test]
    fn outlier_count_binomial() {
        let spec = DistSpec::outlier_mixture(1_000_000, 1.0, 0.001, 10.0, 30.0, 7);
        let t = generate(&spec).unwrap();
        let outliers: Vec<f64> = t.values().iter().copied().filter(|v| v.abs() >= 10.0).collect();
        assert!((900..=1100).contains(&outliers.len()), "{}", outliers.len());
        assert!(outliers.iter().all(|v| v.abs() <= 30.0));
        let negatives = outliers.iter().filter(|v| **v < 0.0).count();
        assert!(negatives > 400 && negatives < outliers.len() - 400);
    }

    #[test]
    fn student_t_variance() {
        // Var = dof / (dof - 2) = 2.5 for dof = 10
        let t = generate(&DistSpec::student_t(200_000, 0.0, 1.0, 10.0, 5)).unwrap();
        let (mean, std) = mean_std(t.values());
        assert!(mean.abs() < 0.02);
        assert!((std * std - 1.25).abs() < 0.03, "var {}", std * std);
    }

    #[test]
    fn student_t_small_dof_is_finite() {
        let t = generate(&DistSpec::student_t(10_000, 0.0, 1.0, 0.5, 5)).unwrap();
        assert!(t.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lognormal_median() {
        let t = generate(&DistSpec::lognormal(100_001, 1.0, 0.5, 5)).unwrap();
        let mut v = t.into_values();
        assert!(v.iter().all(|x| *x > 0.0));
        v.sort_by(f64::total_cmp);
        let median = v[v.len() / 2];
        assert!((median.ln() - 1.0).abs() < 0.01, "median {median}");
    }

    #[test]
    fn rejects_invalid_specs() {
        let base = DistSpec::outlier_mixture(10, 1.0, 0.01, 10.0, 30.0, 1);
        for spec in [
            DistSpec { std: 0.0, ..base },
            DistSpec { outlier_fraction: 1.0, ..base },
            DistSpec { outlier_fraction: -0.1, ..base },
            DistSpec { outlier_low: 30.0, outlier_high: 10.0, ..base },
            DistSpec::student_t(10, 0.0, 1.0, 0.0, 1),
        ] {
            assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
        }
    }
}
