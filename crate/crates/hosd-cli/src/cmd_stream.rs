use std::io::{BufRead, Write};

use hosd::streaming::{StreamConfig, StreamState};
use serde_json::json;

use crate::{CliError, StreamArgs};

/// Reads length-prefixed CSV frames (`n,v1,...,vn`, one per line) from
/// standard input and emits one JSON event line per record. The first frame
/// fixes the record length.
pub fn run(args: &StreamArgs) -> Result<(), CliError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut state: Option<StreamState> = None;
    let mut record_index = 0usize;

    for (idx, line) in stdin.lock().lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CliError::Io(format!("stdin read failed: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record = parse_frame(trimmed, lineno)?;
        let state = match &mut state {
            Some(s) => {
                if record.len() != s.record_len() {
                    return Err(CliError::Io(format!(
                        "line {lineno}: frame length {} does not match stream length {}",
                        record.len(),
                        s.record_len()
                    )));
                }
                s
            }
            None => {
                let cfg = StreamConfig {
                    lambda: args.lambda,
                    alpha: args.alpha,
                    false_positive_rate: args.fp_rate,
                    quasi_cumulant_width: args.delta_w,
                    bandwidth: args.bandwidth,
                    theta_override: args.theta,
                    calibration_capacity: args.calibration,
                };
                state = Some(
                    StreamState::new(record.len(), cfg)
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                );
                state.as_mut().unwrap()
            }
        };
        let event = state
            .push_record(&record)
            .map_err(|e| CliError::Io(format!("line {lineno}: {e}")))?;
        // Non-finite scores and thresholds serialize as null.
        let line = json!({
            "record": record_index,
            "detected": event.detected,
            "lag": event.lag,
            "score": event.score,
            "theta": event.theta,
        });
        match writeln!(out, "{line}") {
            Ok(()) => {}
            // Downstream consumer went away; stop quietly.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(CliError::Io(format!("stdout write failed: {e}"))),
        }
        record_index += 1;
    }
    Ok(())
}

fn parse_frame(line: &str, lineno: usize) -> Result<Vec<f64>, CliError> {
    let mut fields = line.split(',');
    let count_field = fields.next().unwrap_or("");
    let count: usize = count_field.trim().parse().map_err(|_| {
        CliError::Io(format!(
            "line {lineno}, column 1: frame length prefix {count_field:?} is not an integer"
        ))
    })?;
    let mut values = Vec::with_capacity(count);
    for (c, field) in fields.enumerate() {
        let v: f64 = field.trim().parse().map_err(|_| {
            CliError::Io(format!(
                "line {lineno}, column {}: {field:?} is not a number",
                c + 2
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::Io(format!(
                "line {lineno}, column {}: non-finite sample",
                c + 2
            )));
        }
        values.push(v);
    }
    if values.len() != count {
        return Err(CliError::Io(format!(
            "line {lineno}: frame declares {count} samples but carries {}",
            values.len()
        )));
    }
    Ok(values)
}
