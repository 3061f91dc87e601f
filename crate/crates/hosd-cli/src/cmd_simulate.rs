use std::fmt::Write as _;
use std::fs;

use hosd::synthesis::{embed_ensemble, make_transient, NoiseKind, OutbandMode, SynthesisSpec};
use serde_json::json;

use crate::io::{format_f64, write_columns, write_text};
use crate::{json_db, parse_band, CliError, SimulateArgs};

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let passband = parse_band(&args.passband)?;
    let noise_kind = match args.noise.as_str() {
        "gaussian" => NoiseKind::Gaussian,
        "chi2" => NoiseKind::Chi2Filtered,
        other => return Err(CliError::Usage(format!("unknown noise kind {other:?}"))),
    };
    let outband_mode = match args.outband_mode.as_str() {
        "lowpass" => OutbandMode::LowpassLiteral,
        "complement" => OutbandMode::Complement,
        other => return Err(CliError::Usage(format!("unknown outband mode {other:?}"))),
    };
    let spec = SynthesisSpec {
        record_len: args.samples,
        num_records: args.records,
        passband,
        gauss_window_std: args.window_std,
        inband_snr_db: args.inband_db,
        outband_snr_db: args.outband_db,
        noise_kind,
        outband_mode,
        seed: args.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let waveform = make_transient(&spec)?;
    let (ensemble, truth) = embed_ensemble(&waveform, &spec)?;

    let echo = json!({
        "command": "simulate",
        "records": args.records,
        "samples": args.samples,
        "passband": [passband.0, passband.1],
        "window_std": args.window_std,
        "inband_db": json_db(args.inband_db),
        "outband_db": json_db(args.outband_db),
        "noise": args.noise,
        "outband_mode": args.outband_mode,
        "seed": args.seed,
        "rng": "chacha8",
    });
    let echo_line = echo.to_string();

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let headers: Vec<String> = (0..args.records).map(|j| format!("rec_{j}")).collect();
    let columns: Vec<Vec<f64>> = (0..args.records)
        .map(|j| ensemble.record(j).to_vec())
        .collect();
    write_columns(&args.out_dir.join("ensemble.csv"), &echo_line, &headers, &columns)?;

    // Ground truth in long format: waveform samples, per-record delays and
    // the achieved per-record noise-to-signal energy ratios.
    let mut truth_csv = String::new();
    let _ = writeln!(truth_csv, "# hosd-config: {echo_line}");
    let _ = writeln!(truth_csv, "kind,index,value");
    for (t, v) in truth.waveform.iter().enumerate() {
        let _ = writeln!(truth_csv, "waveform,{t},{}", format_f64(*v));
    }
    for (j, d) in truth.true_delays.iter().enumerate() {
        let _ = writeln!(truth_csv, "delay,{j},{}", format_f64(*d as f64));
    }
    for (j, r) in truth.inband_energy_ratio.iter().enumerate() {
        let _ = writeln!(truth_csv, "inband_energy_ratio,{j},{}", format_f64(*r));
    }
    for (j, r) in truth.outband_energy_ratio.iter().enumerate() {
        let _ = writeln!(truth_csv, "outband_energy_ratio,{j},{}", format_f64(*r));
    }
    write_text(&args.out_dir.join("truth.csv"), &truth_csv)?;

    let config_json = serde_json::to_string_pretty(&echo).expect("serializable echo");
    write_text(&args.out_dir.join("config.json"), &config_json)?;
    Ok(())
}
