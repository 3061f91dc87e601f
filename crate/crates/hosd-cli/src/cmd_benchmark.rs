use std::fmt::Write as _;

use hosd::baselines::{pairwise_xcorr_delays, svd_phase_delays, woody_align};
use hosd::delay::iterate_alignment;
use hosd::synthesis::{circular_delay_correlation, embed_ensemble, make_transient, SynthesisSpec};
use rayon::prelude::*;
use serde_json::json;

use crate::io::{format_f64, write_text};
use crate::{parse_f64_list, BenchmarkArgs, CliError};

const BASE_LOW: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Method {
    Hosd,
    Svd,
    Woody,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Hosd => "hosd",
            Method::Svd => "svd",
            Method::Woody => "woody",
        }
    }
}

fn parse_methods(spec: &str) -> Result<Vec<Method>, CliError> {
    let mut methods = Vec::new();
    for part in spec.split(',') {
        let m = match part.trim() {
            "hosd" => Method::Hosd,
            "svd" => Method::Svd,
            "woody" => Method::Woody,
            other => return Err(CliError::Usage(format!("unknown method {other:?}"))),
        };
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    Ok(methods)
}

struct Cell {
    method: Method,
    inband_db: f64,
    outband_db: f64,
    bandwidth_ratio: f64,
}

pub fn run(args: &BenchmarkArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.methods)?;
    let inband = parse_f64_list(&args.inband_db, "in-band SNR")?;
    let outband = parse_f64_list(&args.outband_db, "out-band SNR")?;
    let ratios = parse_f64_list(&args.bandwidth_ratios, "bandwidth ratio")?;
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    for &r in &ratios {
        let high = BASE_LOW * (1.0 + r);
        if !(r > 0.0 && high <= 0.5) {
            return Err(CliError::Usage(format!(
                "bandwidth ratio {r} puts the passband edge at {high}, outside (0, 0.5]"
            )));
        }
    }
    let align_template = args.engine.align_config()?;

    // Worker pool sized from the environment knob when present.
    if let Ok(workers) = std::env::var("HOSD_WORKERS") {
        let n: usize = workers
            .parse()
            .map_err(|_| CliError::Usage(format!("bad HOSD_WORKERS value {workers:?}")))?;
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let mut cells = Vec::new();
    for &method in &methods {
        for &ib in &inband {
            for &ob in &outband {
                for &ratio in &ratios {
                    cells.push(Cell {
                        method,
                        inband_db: ib,
                        outband_db: ob,
                        bandwidth_ratio: ratio,
                    });
                }
            }
        }
    }

    let results: Vec<(usize, Vec<f64>)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let corrs: Vec<f64> = (0..args.seeds)
                .into_par_iter()
                .map(|seed| run_cell(args, &align_template, cell, seed).unwrap_or(0.0))
                .collect();
            (idx, corrs)
        })
        .collect();

    let mut sorted = results;
    sorted.sort_by_key(|(idx, _)| *idx);

    let echo = json!({
        "command": "benchmark",
        "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "inband_db": inband.iter().map(|&v| crate::json_db(v)).collect::<Vec<_>>(),
        "outband_db": outband.iter().map(|&v| crate::json_db(v)).collect::<Vec<_>>(),
        "bandwidth_ratios": ratios,
        "seeds": args.seeds,
        "records": args.records,
        "samples": args.samples,
        "seed_base": args.seed_base,
        "order": args.engine.order,
        "normalization": args.engine.normalization.name(),
        "rng": "chacha8",
    });
    let mut out = String::new();
    let _ = writeln!(out, "# hosd-config: {echo}");
    let _ = writeln!(
        out,
        "method,inband_db,outband_db,bandwidth_ratio,seeds,median_corr,q1_corr,q3_corr"
    );
    for (idx, mut corrs) in sorted {
        let cell = &cells[idx];
        corrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            let pos = p * (corrs.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            if lo == hi {
                corrs[lo]
            } else {
                corrs[lo] + (corrs[hi] - corrs[lo]) * (pos - lo as f64)
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            cell.method.name(),
            format_f64(cell.inband_db),
            format_f64(cell.outband_db),
            format_f64(cell.bandwidth_ratio),
            args.seeds,
            format_f64(q(0.5)),
            format_f64(q(0.25)),
            format_f64(q(0.75)),
        );
    }
    write_text(&args.out, &out)
}

fn run_cell(
    args: &BenchmarkArgs,
    align_template: &hosd::delay::AlignConfig,
    cell: &Cell,
    seed: u64,
) -> Result<f64, CliError> {
    let t = args.samples;
    let high = BASE_LOW * (1.0 + cell.bandwidth_ratio);
    let spec = SynthesisSpec {
        record_len: t,
        num_records: args.records,
        passband: (BASE_LOW, high),
        inband_snr_db: cell.inband_db,
        outband_snr_db: cell.outband_db,
        seed: args
            .seed_base
            .wrapping_add(seed)
            .wrapping_add((cell.bandwidth_ratio * 1e4) as u64),
        ..Default::default()
    };
    let waveform = make_transient(&spec)?;
    let (ensemble, truth) = embed_ensemble(&waveform, &spec)?;
    let lags = match cell.method {
        Method::Hosd => {
            let mut cfg = align_template.clone();
            if cfg.bandwidth.is_none() {
                // Cover the signal band with a margin; the cap only trims cost.
                cfg.bandwidth = Some(((high * t as f64 * 1.3).ceil() as usize).min(t / 2));
            }
            iterate_alignment(&ensemble, &cfg)?.delays.lags
        }
        Method::Svd => {
            let matrix = pairwise_xcorr_delays(&ensemble)?;
            svd_phase_delays(&matrix.phase, t)?.lags
        }
        Method::Woody => woody_align(&ensemble, 50)?.lags,
    };
    Ok(circular_delay_correlation(&truth.true_delays, &lags, t)?)
}
