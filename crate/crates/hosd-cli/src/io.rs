//! CSV and JSON input/output. All emitted CSVs start with a `# hosd-config:`
//! comment carrying the exact command configuration and seed; the reader
//! skips comment lines, so outputs feed back in unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::CliError;

/// A numeric matrix parsed from CSV, rows = samples, columns = records.
#[derive(Debug)]
pub struct CsvMatrix {
    /// Row-major values, `rows x cols`.
    pub values: Vec<Vec<f64>>,
    pub cols: usize,
}

/// Parses a samples-by-records CSV. `#` comment lines are skipped and a
/// single leading header row is tolerated. Errors carry line and column
/// numbers (1-based).
pub fn read_matrix(path: &Path) -> Result<CsvMatrix, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = 0usize;
    let mut header_allowed = true;
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let mut parsed = Vec::with_capacity(fields.len());
        let mut failed_col = None;
        for (c, field) in fields.iter().enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                _ => {
                    failed_col = Some(c + 1);
                    break;
                }
            }
        }
        match failed_col {
            None => {
                if cols == 0 {
                    cols = parsed.len();
                } else if parsed.len() != cols {
                    return Err(CliError::Io(format!(
                        "{}: line {lineno}: expected {cols} columns, found {}",
                        path.display(),
                        parsed.len()
                    )));
                }
                header_allowed = false;
                rows.push(parsed);
            }
            Some(col) => {
                if header_allowed {
                    // Treat the first unparseable row as a header.
                    header_allowed = false;
                    cols = fields.len();
                    continue;
                }
                return Err(CliError::Io(format!(
                    "{}: line {lineno}, column {col}: not a finite number",
                    path.display()
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no data rows found",
            path.display()
        )));
    }
    Ok(CsvMatrix { values: rows, cols })
}

/// Columns-of-series CSV writer: `series[c]` becomes column `c`.
pub fn write_columns(
    path: &Path,
    config_echo: &str,
    headers: &[String],
    series: &[Vec<f64>],
) -> Result<(), CliError> {
    let rows = series.first().map(|s| s.len()).unwrap_or(0);
    for s in series {
        assert_eq!(s.len(), rows, "column length mismatch");
    }
    let mut out = String::new();
    let _ = writeln!(out, "# hosd-config: {config_echo}");
    let _ = writeln!(out, "{}", headers.join(","));
    for r in 0..rows {
        let line: Vec<String> = series.iter().map(|s| format_f64(s[r])).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    fs::write(path, out).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Full round-trip float formatting.
pub fn format_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
