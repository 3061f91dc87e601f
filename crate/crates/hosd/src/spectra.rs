//! Per-record DFTs of an ensemble.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

use crate::ensemble::RecordEnsemble;
use crate::fft::FftPair;

/// DFT coefficients of every record in an ensemble (L x T).
#[derive(Debug, Clone)]
pub struct SpectrumSet {
    spectra: Array2<Complex64>,
}

impl SpectrumSet {
    pub fn from_matrix(spectra: Array2<Complex64>) -> Self {
        SpectrumSet { spectra }
    }

    pub fn num_records(&self) -> usize {
        self.spectra.nrows()
    }

    pub fn record_len(&self) -> usize {
        self.spectra.ncols()
    }

    pub fn spectra(&self) -> &Array2<Complex64> {
        &self.spectra
    }

    pub fn record(&self, j: usize) -> ArrayView1<'_, Complex64> {
        self.spectra.row(j)
    }

    /// Spectra of the records advanced by their estimated lags: record `j`
    /// becomes `x_j((t + lag_j) mod T)`, i.e. each row is multiplied by
    /// `exp(+2 pi i w lag_j / T)`.
    pub fn aligned(&self, lags: &[usize]) -> SpectrumSet {
        assert_eq!(lags.len(), self.num_records());
        let t = self.record_len();
        let mut out = self.spectra.clone();
        for (mut row, &lag) in out.rows_mut().into_iter().zip(lags.iter()) {
            if lag % t == 0 {
                continue;
            }
            let step = std::f64::consts::TAU * lag as f64 / t as f64;
            for (w, v) in row.iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, step * w as f64);
            }
        }
        SpectrumSet { spectra: out }
    }
}

/// Length-T DFT of every record. Tapering is the caller's concern: it is
/// applied when the ensemble is constructed.
pub fn fft_records(ensemble: &RecordEnsemble) -> SpectrumSet {
    let t = ensemble.record_len();
    let fft = FftPair::new(t);
    let mut spectra = Array2::<Complex64>::zeros((ensemble.num_records(), t));
    for (mut row, record) in spectra.rows_mut().into_iter().zip(ensemble.records().rows()) {
        let spec = fft.forward_real(record.as_slice().expect("contiguous record"));
        for (dst, src) in row.iter_mut().zip(spec.iter()) {
            *dst = *src;
        }
    }
    SpectrumSet { spectra }
}
