use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use softedge_core::{
    calibrate as calibrate_config, compare_quantizers, decode_tensor, encode_tensor, generate,
    hardware_trace, read_packed, read_tensor, run_report, write_packed, write_tensor, DistSpec,
    Error, QuantConfig, SsmParams,
};

pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_io() {
            EXIT_IO
        } else if e.is_invariant() {
            EXIT_INTERNAL
        } else {
            EXIT_INVALID
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

pub type CliResult = Result<(), CliError>;

/// Reads a file, naming it in the error message.
pub(crate) fn with_path<T>(path: &Path, r: softedge_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

pub fn calibrate(
    input: &Path,
    percentile: f64,
    fine_divisor: f64,
    coarse_multiplier: f64,
    out: &Path,
) -> CliResult {
    let t = with_path(input, read_tensor(input))?;
    if t.is_empty() {
        return Err(CliError::invalid("empty calibration tensor"));
    }
    let cfg = calibrate_config(&t, percentile, fine_divisor, coarse_multiplier)?;
    with_path(out, cfg.save(out))?;
    println!(
        "scale={} L={} H={}",
        cfg.scale, cfg.low_threshold, cfg.high_threshold
    );
    Ok(())
}

pub fn quantize(input: &Path, config: &Path, out: &Path) -> CliResult {
    let t = with_path(input, read_tensor(input))?;
    let cfg = with_path(config, QuantConfig::load(config))?;
    let q = encode_tensor(&t, &cfg)?;
    let bytes = with_path(out, write_packed(out, &q))?;
    println!("elements={} bytes={}", q.len(), bytes);
    Ok(())
}

pub fn dequantize(input: &Path, config: Option<&Path>, out: &Path) -> CliResult {
    let q = with_path(input, read_packed(input))?;
    if let Some(path) = config {
        let cfg = with_path(path, QuantConfig::load(path))?;
        if !cfg.same_codebook(q.config()) {
            return Err(CliError::invalid(format!(
                "{}: config does not match the one embedded in {}",
                path.display(),
                input.display()
            )));
        }
    }
    let t = decode_tensor(&q)?;
    let bytes = with_path(out, write_tensor(out, &t))?;
    println!("elements={} bytes={}", t.len(), bytes);
    Ok(())
}

pub fn eval(input: &Path, config: &Path, csv: bool, out: Option<&Path>) -> CliResult {
    let t = with_path(input, read_tensor(input))?;
    let cfg = with_path(config, QuantConfig::load(config))?;
    let report = compare_quantizers(&t, &cfg)?;
    let mut buf = Vec::new();
    if csv {
        report.write_csv(&mut buf)?;
    } else {
        buf.extend_from_slice(report.to_json().as_bytes());
        buf.push(b'\n');
    }
    emit(out, &buf)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("{}: {}", path.display(), err.message);
            err
        }),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn synth(spec: &DistSpec, out: &Path) -> CliResult {
    let t = generate(spec)?;
    let bytes = with_path(out, write_tensor(out, &t))?;
    println!("elements={} bytes={}", t.len(), bytes);
    Ok(())
}

pub struct SsmArgs {
    pub seq_len: usize,
    pub state_dim: usize,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub percentile: f64,
    pub decay_range: (f64, f64),
    pub report: PathBuf,
}

/// Default SSM input: the outlier mixture used throughout the evaluation.
pub fn default_ssm_input(seq_len: usize, seed: u64) -> DistSpec {
    DistSpec::outlier_mixture(seq_len, 1.0, 0.001, 10.0, 30.0, seed)
}

pub fn ssm(args: &SsmArgs) -> CliResult {
    let x = match &args.input {
        Some(path) => with_path(path, read_tensor(path))?,
        None => generate(&default_ssm_input(args.seq_len, args.seed))?,
    };
    let cfg = match &args.config {
        Some(path) => with_path(path, QuantConfig::load(path))?,
        None => calibrate_config(&x, args.percentile, 4.0, 4.0)?,
    };
    let params = SsmParams::random(args.state_dim, args.seed, args.decay_range)?;
    let report = run_report(&params, &x, &cfg)?;
    let mut text = report.to_json();
    text.push('\n');
    emit(Some(&args.report), text.as_bytes())?;
    println!(
        "output_mse soft_edge={} int8={}",
        report.output.soft_edge.mse, report.output.int8.mse
    );
    Ok(())
}

pub fn trace(value: f64, config: &Path) -> CliResult {
    let cfg = with_path(config, QuantConfig::load(config))?;
    println!("{}", hardware_trace(value, &cfg)?);
    Ok(())
}
