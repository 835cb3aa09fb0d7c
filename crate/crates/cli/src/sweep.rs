use std::path::PathBuf;

use rayon::prelude::*;
use softedge_core::metrics::db_serde;
use softedge_core::{calibrate_scale, compare_quantizers, derive_config, read_tensor, FloatTensor};

use crate::commands::{with_path, CliError, CliResult};

pub const COLUMNS: [&str; 11] = [
    "percentile",
    "fine_divisor",
    "coarse_multiplier",
    "scale",
    "L",
    "H",
    "se_mse",
    "se_sqnr_db",
    "int8_mse",
    "int8_sqnr_db",
    "delta_sqnr_db",
];

pub struct SweepSpec {
    pub input: PathBuf,
    pub percentiles: Vec<f64>,
    pub fine_divisors: Vec<f64>,
    pub coarse_multipliers: Vec<f64>,
    pub out: PathBuf,
}

impl SweepSpec {
    fn validate(&self) -> Result<(), CliError> {
        if self.percentiles.is_empty() || self.fine_divisors.is_empty() || self.coarse_multipliers.is_empty() {
            return Err(CliError::invalid("sweep lists must be non-empty"));
        }
        if let Some(p) = self.percentiles.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
            return Err(CliError::invalid(format!("percentile {p} outside (0, 100]")));
        }
        if self.fine_divisors.iter().chain(&self.coarse_multipliers).any(|v| !(*v >= 1.0) || !v.is_finite()) {
            return Err(CliError::invalid("divisors and multipliers must be finite and >= 1"));
        }
        Ok(())
    }
}

/// One CSV row per (percentile, divisor, multiplier), in that nesting order.
fn rows(t: &FloatTensor, spec: &SweepSpec) -> Result<Vec<[String; 11]>, CliError> {
    let scales = spec
        .percentiles
        .par_iter()
        .map(|&p| calibrate_scale(t, p).map(|s| (p, s)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = Vec::new();
    for &(p, scale) in &scales {
        for &d in &spec.fine_divisors {
            for &m in &spec.coarse_multipliers {
                cells.push((p, scale, d, m));
            }
        }
    }

    let n = t.len() as u64;
    cells
        .into_par_iter()
        .map(|(p, scale, d, m)| {
            let cfg = derive_config(scale, d, m, p, n)?;
            let r = compare_quantizers(t, &cfg)?;
            Ok([
                p.to_string(),
                d.to_string(),
                m.to_string(),
                cfg.scale.to_string(),
                cfg.low_threshold.to_string(),
                cfg.high_threshold.to_string(),
                r.soft_edge.mse.to_string(),
                db_serde::format(r.soft_edge.sqnr_db),
                r.int8.mse.to_string(),
                db_serde::format(r.int8.sqnr_db),
                db_serde::format(r.delta.sqnr_db),
            ])
        })
        .collect()
}

pub fn run(spec: &SweepSpec) -> CliResult {
    spec.validate()?;
    let t = with_path(&spec.input, read_tensor(&spec.input))?;
    if t.is_empty() {
        return Err(CliError::invalid("empty calibration tensor"));
    }
    let rows = rows(&t, spec)?;

    let mut w = csv::Writer::from_path(&spec.out).map_err(csv_error)?;
    w.write_record(COLUMNS).map_err(csv_error)?;
    for row in &rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    println!("rows={}", rows.len());
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => CliError {
            code: crate::commands::EXIT_INTERNAL,
            message: format!("csv encoding failed: {other:?}"),
        },
    }
}
