//! Error statistics for comparing the soft-edge quantizer against the
//! single-scale INT8 baseline, overall and per region.
//!
//! All sums use fixed-tree pairwise summation in binary64 so results do not
//! depend on evaluation order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration::QuantConfig;
use crate::codec::{classify, fake_quant, Quantizer, Region};
use crate::error::{Error, Result};
use crate::tensor::FloatTensor;

const PAIRWISE_LEAF: usize = 64;

/// Pairwise (cascade) summation with a fixed split at the midpoint.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

fn check_pair(reference: &FloatTensor, approx: &FloatTensor) -> Result<()> {
    if reference.len() != approx.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: approx.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::EmptyTensor);
    }
    Ok(())
}

fn squared_errors(reference: &FloatTensor, approx: &FloatTensor) -> Vec<f64> {
    reference
        .values()
        .iter()
        .zip(approx.values())
        .map(|(r, a)| (r - a) * (r - a))
        .collect()
}

pub fn mse(reference: &FloatTensor, approx: &FloatTensor) -> Result<f64> {
    check_pair(reference, approx)?;
    Ok(pairwise_sum(&squared_errors(reference, approx)) / reference.len() as f64)
}

/// `10 log10(signal / noise)` in dB; `+inf` when the approximation is exact.
pub fn sqnr_db(reference: &FloatTensor, approx: &FloatTensor) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: approx.len(),
        });
    }
    let power: Vec<f64> = reference.values().iter().map(|r| r * r).collect();
    let signal = pairwise_sum(&power);
    if signal <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let noise = pairwise_sum(&squared_errors(reference, approx));
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Serializes dB values as JSON numbers, with infinities as the strings
/// `"inf"` / `"-inf"`.
pub mod db_serde {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct DbVisitor;

    impl Visitor<'_> for DbVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or \"inf\"/\"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(DbVisitor)
    }

    /// Text form used in CSV cells.
    pub fn format(v: f64) -> String {
        if v.is_finite() {
            v.to_string()
        } else if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    }
}

/// Difference of two dB values where `inf - inf` is taken as 0.
pub fn db_delta(a: f64, b: f64) -> f64 {
    if a.is_infinite() && a == b {
        0.0
    } else {
        a - b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerStats {
    pub mse: f64,
    #[serde(with = "db_serde")]
    pub sqnr_db: f64,
    pub max_abs_err: f64,
}

impl QuantizerStats {
    pub fn measure(reference: &FloatTensor, approx: &FloatTensor) -> Result<Self> {
        let max_abs_err = reference
            .values()
            .iter()
            .zip(approx.values())
            .map(|(r, a)| (r - a).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            mse: mse(reference, approx)?,
            sqnr_db: sqnr_db(reference, approx)?,
            max_abs_err,
        })
    }

    /// `self - baseline`, field by field.
    pub fn minus(&self, baseline: &Self) -> Self {
        Self {
            mse: self.mse - baseline.mse,
            sqnr_db: db_delta(self.sqnr_db, baseline.sqnr_db),
            max_abs_err: self.max_abs_err - baseline.max_abs_err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region: Region,
    pub count: u64,
    pub fraction: f64,
    pub mse: f64,
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
}

/// Soft-edge errors bucketed by region, in `[small, medium, large]` order.
pub fn region_breakdown(t: &FloatTensor, cfg: &QuantConfig) -> Result<[RegionStats; 3]> {
    let approx = fake_quant(t, cfg, Quantizer::SoftEdge)?;
    let mut abs_errs: [Vec<f64>; 3] = Default::default();
    for (&x, &y) in t.values().iter().zip(approx.values()) {
        let slot = classify(x, cfg)? as usize;
        abs_errs[slot].push((x - y).abs());
    }
    let n = t.len();
    Ok(Region::ALL.map(|region| {
        let errs = &abs_errs[region as usize];
        let count = errs.len();
        let (mse, mean_abs_err) = if count == 0 {
            (0.0, 0.0)
        } else {
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            (
                pairwise_sum(&sq) / count as f64,
                pairwise_sum(errs) / count as f64,
            )
        };
        RegionStats {
            region,
            count: count as u64,
            fraction: if n == 0 { 0.0 } else { count as f64 / n as f64 },
            mse,
            max_abs_err: errs.iter().copied().fold(0.0, f64::max),
            mean_abs_err,
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: QuantConfig,
    pub n: u64,
    pub soft_edge: QuantizerStats,
    pub int8: QuantizerStats,
    pub regions: [RegionStats; 3],
    /// Soft-edge minus INT8.
    pub delta: QuantizerStats,
}

/// CSV header of [`ComparisonReport::write_csv`].
pub const REPORT_CSV_COLUMNS: [&str; 9] = [
    "row_kind",
    "name",
    "count",
    "fraction",
    "mse",
    "sqnr_db",
    "max_abs_err",
    "mean_abs_err",
    "delta_sqnr_db",
];

pub fn compare_quantizers(t: &FloatTensor, cfg: &QuantConfig) -> Result<ComparisonReport> {
    if t.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let se = fake_quant(t, cfg, Quantizer::SoftEdge)?;
    let base = fake_quant(t, cfg, Quantizer::Int8)?;
    let soft_edge = QuantizerStats::measure(t, &se)?;
    let int8 = QuantizerStats::measure(t, &base)?;
    Ok(ComparisonReport {
        config: *cfg,
        n: t.len() as u64,
        soft_edge,
        int8,
        regions: region_breakdown(t, cfg)?,
        delta: soft_edge.minus(&int8),
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("malformed report: {e}")))
    }

    /// One row per quantizer (`soft_edge`, `int8`) and per soft-edge region
    /// (`small`, `medium`, `large`), columns as in [`REPORT_CSV_COLUMNS`].
    /// Cells that do not apply to a row are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_CSV_COLUMNS).map_err(csv_err)?;
        let n = self.n.to_string();
        for (name, stats, delta) in [
            ("soft_edge", &self.soft_edge, db_serde::format(self.delta.sqnr_db)),
            ("int8", &self.int8, String::new()),
        ] {
            w.write_record([
                "quantizer",
                name,
                &n,
                "1",
                &stats.mse.to_string(),
                &db_serde::format(stats.sqnr_db),
                &stats.max_abs_err.to_string(),
                "",
                &delta,
            ])
            .map_err(csv_err)?;
        }
        for r in &self.regions {
            w.write_record([
                "region",
                r.region.name(),
                &r.count.to_string(),
                &r.fraction.to_string(),
                &r.mse.to_string(),
                "",
                &r.max_abs_err.to_string(),
                &r.mean_abs_err.to_string(),
                "",
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invariant(format!("csv encoding failed: {other:?}")),
    }
}
