//! `hosd` command line: simulate synthetic ensembles, decompose CSV
//! ensembles, benchmark delay estimators, and run streaming detection.

mod cmd_benchmark;
mod cmd_decompose;
mod cmd_simulate;
mod cmd_stream;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hosd::{HosOrder, Normalization};

/// Error kinds mapped onto exit codes: usage 1, I/O or parse 2, internal 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<hosd::HosdError> for CliError {
    fn from(e: hosd::HosdError) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "hosd",
    version,
    about = "Blind recovery of recurring transient waveforms via higher-order spectral decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic test ensemble with known ground truth.
    Simulate(SimulateArgs),
    /// Decompose a CSV ensemble into recurring components.
    Decompose(DecomposeArgs),
    /// Sweep noise levels and compare delay estimators.
    Benchmark(BenchmarkArgs),
    /// Online detection over framed records from standard input.
    Stream(StreamArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    /// Power-spectral bicoherence denominator.
    Bicoherence,
    /// Magnitude-weighted denominator.
    Mw,
    /// Magnitude-weighted with bias correction (default).
    MwBias,
}

impl NormalizationArg {
    pub fn to_normalization(self) -> Normalization {
        match self {
            NormalizationArg::Bicoherence => Normalization::Bicoherence,
            NormalizationArg::Mw => Normalization::MagnitudeWeighted,
            NormalizationArg::MwBias => Normalization::MagnitudeWeightedBiasCorrected,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormalizationArg::Bicoherence => "bicoherence",
            NormalizationArg::Mw => "mw",
            NormalizationArg::MwBias => "mw-bias",
        }
    }
}

/// Estimator knobs shared by decompose and benchmark.
#[derive(Args, Clone)]
pub struct EngineArgs {
    /// HOS order: 3 (bispectrum) or 4 (trispectrum).
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    #[arg(long, value_enum, default_value_t = NormalizationArg::MwBias)]
    pub normalization: NormalizationArg,
    /// Quasi-cumulant exclusion half-width in bins.
    #[arg(long, default_value_t = 1)]
    pub delta_w: usize,
    /// Realignment iteration cap.
    #[arg(long, default_value_t = 25)]
    pub max_iter: usize,
    /// Stop once at most this fraction of records still moves.
    #[arg(long, default_value_t = 0.02)]
    pub conv_fraction: f64,
    /// Bandwidth cap W in bins (default: full grid).
    #[arg(long)]
    pub bandwidth: Option<usize>,
}

impl EngineArgs {
    pub fn align_config(&self) -> Result<hosd::delay::AlignConfig, CliError> {
        let order = match self.order {
            3 => HosOrder::Bispectrum,
            4 => HosOrder::Trispectrum,
            other => return Err(CliError::Usage(format!("unsupported order {other}: use 3 or 4"))),
        };
        if self.max_iter == 0 {
            return Err(CliError::Usage("--max-iter must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.conv_fraction) {
            return Err(CliError::Usage("--conv-fraction must lie in [0, 1)".into()));
        }
        Ok(hosd::delay::AlignConfig {
            order,
            max_iterations: self.max_iter,
            convergence_fraction: self.conv_fraction,
            normalization: self.normalization.to_normalization(),
            quasi_cumulant_width: self.delta_w,
            bandwidth: self.bandwidth,
        })
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub records: usize,
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Passband as "low,high" in normalized frequency.
    #[arg(long, default_value = "0.01,0.1")]
    pub passband: String,
    /// Gaussian time-window standard width in samples.
    #[arg(long, default_value_t = 20.0)]
    pub window_std: f64,
    /// Signal-to-in-band-noise ratio in dB ("inf" disables).
    #[arg(long, default_value_t = 9.5, allow_hyphen_values = true)]
    pub inband_db: f64,
    #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
    pub outband_db: f64,
    /// Noise family: gaussian or chi2.
    #[arg(long, default_value = "gaussian")]
    pub noise: String,
    /// Out-band placement: lowpass (benchmark-figure literal) or complement.
    #[arg(long, default_value = "lowpass")]
    pub outband_mode: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// Input CSV: rows are samples, columns are records.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// False positive rate for thresholds and the deflation stop.
    #[arg(long, default_value_t = 0.05)]
    pub fp_rate: f64,
    #[arg(long, default_value_t = 8)]
    pub max_components: usize,
    /// Segment a single-column input into Hann-tapered records of this length.
    #[arg(long)]
    pub segment_len: Option<usize>,
    /// Hop between segments (default: half the segment length).
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub sample_rate: f64,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma list drawn from hosd, svd, woody.
    #[arg(long, default_value = "hosd,svd,woody")]
    pub methods: String,
    /// Comma list of in-band SNR levels in dB.
    #[arg(long, default_value = "5,0,-5,-10,-20", allow_hyphen_values = true)]
    pub inband_db: String,
    /// Comma list of out-band SNR levels in dB.
    #[arg(long, default_value = "5,0,-5,-10,-15", allow_hyphen_values = true)]
    pub outband_db: String,
    /// Signal bandwidths as (high - low)/low ratios over a 0.01 high-pass.
    #[arg(long, default_value = "9")]
    pub bandwidth_ratios: String,
    /// Seeds per cell.
    #[arg(long, default_value_t = 40)]
    pub seeds: u64,
    #[arg(long, default_value_t = 64)]
    pub records: usize,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Args)]
pub struct StreamArgs {
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub fp_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub delta_w: usize,
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Fixed detection threshold (default: adaptive calibration).
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Sub-gate records kept for threshold calibration.
    #[arg(long, default_value_t = 32)]
    pub calibration: usize,
}

pub fn parse_band(spec: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "passband must be \"low,high\", got {spec:?}"
        )));
    }
    let low: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad passband low {:?}", parts[0])))?;
    let high: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad passband high {:?}", parts[1])))?;
    if !(low > 0.0 && low < high && high <= 0.5) {
        return Err(CliError::Usage(format!(
            "passband ({low}, {high}) must satisfy 0 < low < high <= 0.5"
        )));
    }
    Ok((low, high))
}

/// JSON value for a dB level; infinities become the string "inf" so config
/// echoes stay lossless.
pub fn json_db(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

pub fn parse_f64_list(spec: &str, what: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad {what} value {s:?}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate::run(&args),
        Command::Decompose(args) => cmd_decompose::run(&args),
        Command::Benchmark(args) => cmd_benchmark::run(&args),
        Command::Stream(args) => cmd_stream::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
