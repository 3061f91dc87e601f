use std::fmt::Write as _;
use std::fs;

use hosd::decomposition::{hosd_decompose, DecompositionConfig};
use hosd::{RecordEnsemble, Taper};
use ndarray::Array2;
use serde_json::json;

use crate::io::{read_matrix, write_columns, write_text};
use crate::{CliError, DecomposeArgs};

pub fn run(args: &DecomposeArgs) -> Result<(), CliError> {
    let align = args.engine.align_config()?;
    if !(0.0..0.5).contains(&args.fp_rate) || args.fp_rate == 0.0 {
        return Err(CliError::Usage("--fp-rate must lie in (0, 0.5)".into()));
    }
    if args.max_components == 0 {
        return Err(CliError::Usage("--max-components must be positive".into()));
    }

    let matrix = read_matrix(&args.input)?;
    let ensemble = build_ensemble(args, &matrix.values, matrix.cols)?;
    let original = ensemble.records().clone();

    let config = DecompositionConfig {
        align,
        max_components: args.max_components,
        false_positive_rate: args.fp_rate,
    };
    let result = hosd_decompose(&ensemble, &config)?;

    let echo = json!({
        "command": "decompose",
        "input": args.input.display().to_string(),
        "order": args.engine.order,
        "normalization": args.engine.normalization.name(),
        "delta_w": args.engine.delta_w,
        "max_iter": args.engine.max_iter,
        "conv_fraction": args.engine.conv_fraction,
        "bandwidth": args.engine.bandwidth,
        "fp_rate": args.fp_rate,
        "max_components": args.max_components,
        "segment_len": args.segment_len,
        "hop": args.hop,
        "sample_rate": args.sample_rate,
    });
    let echo_line = echo.to_string();

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out_dir.display())))?;

    // Component waveforms as columns.
    let headers: Vec<String> = (0..result.components.len())
        .map(|p| format!("comp_{p}"))
        .collect();
    let columns: Vec<Vec<f64>> = result
        .components
        .iter()
        .map(|c| c.waveform.clone())
        .collect();
    write_columns(&args.out_dir.join("components.csv"), &echo_line, &headers, &columns)?;

    // Per-record lags, one row per component.
    let mut delays_csv = String::new();
    let _ = writeln!(delays_csv, "# hosd-config: {echo_line}");
    let l = ensemble.num_records();
    let rec_headers: Vec<String> = (0..l).map(|j| format!("rec_{j}")).collect();
    let _ = writeln!(delays_csv, "component,{}", rec_headers.join(","));
    for c in &result.components {
        let lags: Vec<String> = c.delays.lags.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(delays_csv, "{},{}", c.index, lags.join(","));
    }
    write_text(&args.out_dir.join("delays.csv"), &delays_csv)?;

    // Denoised reconstruction: input minus residual, by the bookkeeping
    // identity of the deflation loop.
    let reconstruction: Array2<f64> = &original - result.residual.records();
    let rec_columns: Vec<Vec<f64>> = (0..l).map(|j| reconstruction.row(j).to_vec()).collect();
    write_columns(
        &args.out_dir.join("reconstruction.csv"),
        &echo_line,
        &rec_headers,
        &rec_columns,
    )?;

    let components_json: Vec<serde_json::Value> = result
        .components
        .iter()
        .zip(result.convergence_counts.iter())
        .map(|(c, counts)| {
            json!({
                "index": c.index,
                "threshold": c.threshold,
                "scale": c.scale,
                "iterations": counts.len(),
                "changed_counts": counts,
                "peak_values": c.delays.peak_values,
            })
        })
        .collect();
    let summary = json!({
        "config": echo,
        "records": l,
        "record_len": ensemble.record_len(),
        "n_components": result.components.len(),
        "stop_reason": result.stop_reason.as_str(),
        "components": components_json,
    });
    write_text(
        &args.out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("serializable summary"),
    )?;
    Ok(())
}

/// Columns are records unless a single-column input is segmented into
/// Hann-tapered records of `--segment-len` samples.
fn build_ensemble(
    args: &DecomposeArgs,
    rows: &[Vec<f64>],
    cols: usize,
) -> Result<RecordEnsemble, CliError> {
    match args.segment_len {
        None => {
            if cols < 2 {
                return Err(CliError::Usage(
                    "decomposition needs at least 2 record columns (or --segment-len for a single long record)"
                        .into(),
                ));
            }
            let records: Vec<Vec<f64>> = (0..cols)
                .map(|c| rows.iter().map(|r| r[c]).collect())
                .collect();
            RecordEnsemble::from_rows(&records, args.sample_rate)
                .map_err(|e| CliError::Io(e.to_string()))
        }
        Some(len) => {
            if cols != 1 {
                return Err(CliError::Usage(
                    "--segment-len applies to single-column inputs only".into(),
                ));
            }
            if len < 8 {
                return Err(CliError::Usage("--segment-len must be at least 8".into()));
            }
            let hop = args.hop.unwrap_or(len / 2).max(1);
            let series: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            if series.len() < len {
                return Err(CliError::Usage(format!(
                    "input has {} samples, shorter than the segment length {len}",
                    series.len()
                )));
            }
            let mut segments: Vec<Vec<f64>> = Vec::new();
            let mut start = 0usize;
            while start + len <= series.len() {
                segments.push(series[start..start + len].to_vec());
                start += hop;
            }
            if segments.len() < 2 {
                return Err(CliError::Usage(
                    "segmentation produced fewer than 2 records; reduce --segment-len or --hop".into(),
                ));
            }
            let l = segments.len();
            let flat: Vec<f64> = segments.into_iter().flatten().collect();
            let matrix = Array2::from_shape_vec((l, len), flat)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            RecordEnsemble::with_taper(matrix, args.sample_rate, Taper::Hann)
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
