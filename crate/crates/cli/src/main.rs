//! `softedge` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 internal
//! invariant violation.

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "softedge", version, about = "Soft-edge activation quantizer toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a scale from a QSEF tensor and write a config JSON.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 99.99)]
        percentile: f64,
        #[arg(long, default_value_t = 4.0)]
        fine_divisor: f64,
        #[arg(long, default_value_t = 4.0)]
        coarse_multiplier: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a QSEF tensor into a packed QSE1 file.
    Quantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a packed QSE1 file back into a QSEF tensor.
    Dequantize {
        #[arg(long)]
        input: PathBuf,
        /// Optional config that must match the one embedded in the input.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare soft-edge and INT8 fake quantization on a tensor.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic activation tensor.
    Synth {
        #[arg(long, value_enum)]
        dist: Dist,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        mean: f64,
        #[arg(long, default_value_t = 1.0)]
        std: f64,
        #[arg(long, default_value_t = 0.001)]
        outlier_fraction: f64,
        #[arg(long, default_value_t = 10.0)]
        outlier_low: f64,
        #[arg(long, default_value_t = 30.0)]
        outlier_high: f64,
        #[arg(long, default_value_t = 3.0)]
        dof: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the linear SSM with quantized inputs and report output error.
    Ssm {
        #[arg(long, default_value_t = 4096)]
        seq_len: usize,
        #[arg(long, default_value_t = 16)]
        state_dim: usize,
        #[arg(long)]
        seed: u64,
        /// QSEF input; defaults to a seeded outlier mixture of length seq-len.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Config JSON; defaults to calibrating on the input.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 99.99)]
        percentile: f64,
        #[arg(long, default_value_t = 0.5)]
        decay_min: f64,
        #[arg(long, default_value_t = 0.99)]
        decay_max: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Sweep percentile x fine divisor x coarse multiplier and write CSV.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        percentiles: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        fine_divisors: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        coarse_multipliers: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the datapath trace of a single value.
    Trace {
        #[arg(long, allow_hyphen_values = true)]
        value: f64,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Gaussian,
    OutlierMixture,
    StudentT,
    Lognormal,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate {
            input,
            percentile,
            fine_divisor,
            coarse_multiplier,
            out,
        } => commands::calibrate(&input, percentile, fine_divisor, coarse_multiplier, &out),
        Command::Quantize { input, config, out } => commands::quantize(&input, &config, &out),
        Command::Dequantize { input, config, out } => {
            commands::dequantize(&input, config.as_deref(), &out)
        }
        Command::Eval {
            input,
            config,
            format,
            out,
        } => commands::eval(&input, &config, matches!(format, ReportFormat::Csv), out.as_deref()),
        Command::Synth {
            dist,
            n,
            seed,
            mean,
            std,
            outlier_fraction,
            outlier_low,
            outlier_high,
            dof,
            out,
        } => {
            let kind = match dist {
                Dist::Gaussian => softedge_core::DistKind::Gaussian,
                Dist::OutlierMixture => softedge_core::DistKind::OutlierMixture,
                Dist::StudentT => softedge_core::DistKind::StudentT,
                Dist::Lognormal => softedge_core::DistKind::Lognormal,
            };
            let spec = softedge_core::DistSpec {
                kind,
                mean,
                std,
                outlier_fraction,
                outlier_low,
                outlier_high,
                degrees_of_freedom: dof,
                n,
                seed,
            };
            commands::synth(&spec, &out)
        }
        Command::Ssm {
            seq_len,
            state_dim,
            seed,
            input,
            config,
            percentile,
            decay_min,
            decay_max,
            report,
        } => commands::ssm(&commands::SsmArgs {
            seq_len,
            state_dim,
            seed,
            input,
            config,
            percentile,
            decay_range: (decay_min, decay_max),
            report,
        }),
        Command::Sweep {
            input,
            percentiles,
            fine_divisors,
            coarse_multipliers,
            out,
        } => sweep::run(&sweep::SweepSpec {
            input,
            percentiles,
            fine_divisors,
            coarse_multipliers,
            out,
        }),
        Command::Trace { value, config } => commands::trace(value, &config),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
