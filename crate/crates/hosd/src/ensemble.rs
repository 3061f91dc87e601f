//! Record ensembles: stacks of equal-length real-valued records.

use ndarray::{Array2, ArrayView1};

use crate::error::{HosdError, HosdResult};

/// Minimum record length accepted by the estimators.
pub const MIN_RECORD_LEN: usize = 8;

/// Window applied per record before spectral estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Taper {
    /// Records are used as-is. The right choice for circularly shifted data.
    #[default]
    None,
    /// Hann window, for segments cut from longer records.
    Hann,
}

impl Taper {
    /// Window weights for a record of length `len`.
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Taper::None => vec![1.0; len],
            Taper::Hann => (0..len)
                .map(|t| {
                    let phase = std::f64::consts::TAU * t as f64 / len as f64;
                    0.5 * (1.0 - phase.cos())
                })
                .collect(),
        }
    }
}

/// L real-valued records of identical length T.
#[derive(Debug, Clone)]
pub struct RecordEnsemble {
    records: Array2<f64>,
    sample_rate: f64,
    taper: Taper,
}

impl RecordEnsemble {
    /// Wraps an L x T matrix of samples without applying any taper.
    pub fn new(records: Array2<f64>, sample_rate: f64) -> HosdResult<Self> {
        Self::validate(&records)?;
        Ok(RecordEnsemble {
            records,
            sample_rate,
            taper: Taper::None,
        })
    }

    /// Applies `taper` to each record and wraps the result.
    pub fn with_taper(mut records: Array2<f64>, sample_rate: f64, taper: Taper) -> HosdResult<Self> {
        Self::validate(&records)?;
        let weights = taper.weights(records.ncols());
        for mut row in records.rows_mut() {
            for (v, w) in row.iter_mut().zip(weights.iter()) {
                *v *= w;
            }
        }
        Ok(RecordEnsemble {
            records,
            sample_rate,
            taper,
        })
    }

    /// Builds an ensemble from per-record sample vectors.
    pub fn from_rows(rows: &[Vec<f64>], sample_rate: f64) -> HosdResult<Self> {
        if rows.is_empty() {
            return Err(HosdError::InvalidInput("ensemble has no records".into()));
        }
        let len = rows[0].len();
        for (j, row) in rows.iter().enumerate() {
            if row.len() != len {
                return Err(HosdError::InvalidInput(format!(
                    "record {j} has length {} but record 0 has length {len}",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let records = Array2::from_shape_vec((rows.len(), len), flat)
            .map_err(|e| HosdError::InvalidInput(e.to_string()))?;
        Self::new(records, sample_rate)
    }

    fn validate(records: &Array2<f64>) -> HosdResult<()> {
        let (l, t) = records.dim();
        if l == 0 {
            return Err(HosdError::InvalidInput("ensemble has no records".into()));
        }
        if t < MIN_RECORD_LEN {
            return Err(HosdError::InvalidInput(format!(
                "record length {t} is below the minimum {MIN_RECORD_LEN}"
            )));
        }
        if !records.iter().all(|v| v.is_finite()) {
            return Err(HosdError::InvalidInput(
                "ensemble contains a non-finite sample".into(),
            ));
        }
        Ok(())
    }

    pub fn num_records(&self) -> usize {
        self.records.nrows()
    }

    pub fn record_len(&self) -> usize {
        self.records.ncols()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }

    pub fn records(&self) -> &Array2<f64> {
        &self.records
    }

    pub fn record(&self, j: usize) -> ArrayView1<'_, f64> {
        self.records.row(j)
    }

    /// Subtracts `delta` in place; used by the deflation loop.
    pub(crate) fn subtract(&mut self, delta: &Array2<f64>) {
        self.records -= delta;
    }

    /// A new ensemble holding records `range.start..range.end`.
    pub fn subset(&self, range: std::ops::Range<usize>) -> HosdResult<RecordEnsemble> {
        if range.end > self.num_records() || range.is_empty() {
            return Err(HosdError::InvalidInput(format!(
                "record range {range:?} out of bounds for {} records",
                self.num_records()
            )));
        }
        let records = self
            .records
            .slice(ndarray::s![range.start..range.end, ..])
            .to_owned();
        Ok(RecordEnsemble {
            records,
            sample_rate: self.sample_rate,
            taper: self.taper,
        })
    }

    /// Every record circularly shifted by the same amount: sample `t` of the
    /// output is sample `(t - shift) mod T` of the input.
    pub fn shifted_all(&self, shift: usize) -> RecordEnsemble {
        let t = self.record_len();
        let mut out = self.records.clone();
        for (mut dst, src) in out.rows_mut().into_iter().zip(self.records.rows()) {
            for i in 0..t {
                dst[(i + shift) % t] = src[i];
            }
        }
        RecordEnsemble {
            records: out,
            sample_rate: self.sample_rate,
            taper: self.taper,
        }
    }
}

/// Circularly delays `x` by `shift`: output sample `t` is `x[(t - shift) mod T]`.
pub fn delay_circular(x: &[f64], shift: usize) -> Vec<f64> {
    let t = x.len();
    let mut out = vec![0.0; t];
    for (i, &v) in x.iter().enumerate() {
        out[(i + shift) % t] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_short_and_non_finite_records() {
        let short = Array2::<f64>::zeros((2, 4));
        assert!(RecordEnsemble::new(short, 1.0).is_err());

        let mut bad = Array2::<f64>::zeros((2, 8));
        bad[(1, 3)] = f64::NAN;
        assert!(RecordEnsemble::new(bad, 1.0).is_err());
    }

    #[test]
    fn hann_taper_is_zero_at_edges() {
        let w = Taper::Hann.weights(16);
        assert!(w[0].abs() < 1e-12);
        assert!((w[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_rows_requires_equal_lengths() {
        let rows = vec![vec![0.0; 8], vec![0.0; 9]];
        assert!(RecordEnsemble::from_rows(&rows, 1.0).is_err());
    }

    #[test]
    fn delay_circular_moves_impulse() {
        let mut x = vec![0.0; 8];
        x[2] = 1.0;
        let y = delay_circular(&x, 3);
        assert_eq!(y[5], 1.0);
        let z = delay_circular(&x, 7);
        assert_eq!(z[1], 1.0);
    }

    #[test]
    fn shifted_all_preserves_shape() {
        let e = RecordEnsemble::new(array![[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]], 1.0).unwrap();
        let s = e.shifted_all(2);
        assert_eq!(s.record(0).to_vec(), vec![7.0, 8.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}
