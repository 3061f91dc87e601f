//! Partial delay filters, phase-compensated averaging and iterated
//! realignment.
//!
//! Lag convention: a record containing the waveform delayed by `s` samples
//! (circularly) gets lag estimate `s` up to a common offset shared by all
//! records. Advancing a record by its lag, `x((t + lag) mod T)`, brings the
//! ensemble into alignment.

use num_complex::Complex64;

use crate::ensemble::RecordEnsemble;
use crate::error::{HosdError, HosdResult};
use crate::fft::FftPair;
use crate::hos::{estimate_hos_filter, HosEstimationConfig, HosFilter, HosOrder, Normalization};
use crate::spectra::{fft_records, SpectrumSet};

/// A 1-D detection filter in both domains.
#[derive(Debug, Clone)]
pub struct DelayFilter {
    /// Frequency response G[w], length T.
    pub freq: Vec<Complex64>,
    /// Real time-domain form g[t] (real part of the normalized inverse DFT).
    pub time: Vec<f64>,
    /// Realignment iteration that produced the filter.
    pub iteration: usize,
}

impl DelayFilter {
    pub fn from_freq(freq: Vec<Complex64>, iteration: usize) -> Self {
        let fft = FftPair::new(freq.len());
        let time = fft.inverse_real(&freq);
        DelayFilter {
            freq,
            time,
            iteration,
        }
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Circular convolution of the filter with a real record.
    pub fn apply(&self, x: &[f64]) -> HosdResult<Vec<f64>> {
        if x.len() != self.freq.len() {
            return Err(HosdError::DimensionMismatch {
                expected: self.freq.len(),
                actual: x.len(),
            });
        }
        let fft = FftPair::new(x.len());
        let spec = fft.forward_real(x);
        Ok(self.apply_spectrum(&spec, &fft))
    }

    fn apply_spectrum(&self, spec: &[Complex64], fft: &FftPair) -> Vec<f64> {
        let product: Vec<Complex64> = self
            .freq
            .iter()
            .zip(spec.iter())
            .map(|(g, x)| g * x)
            .collect();
        fft.inverse_real(&product)
    }
}

/// Per-record integer lags with peak metadata.
#[derive(Debug, Clone)]
pub struct DelayEstimates {
    /// Circular lags in samples, one per record, each in `0..T`.
    pub lags: Vec<usize>,
    /// Filter output at the peak, one per record.
    pub peak_values: Vec<f64>,
    /// Peak sign per record; identically +1 for odd orders.
    pub signs: Vec<i8>,
    /// Records whose lag moved in the last iteration.
    pub changed_count: usize,
}

impl DelayEstimates {
    pub fn zeros(count: usize) -> Self {
        DelayEstimates {
            lags: vec![0; count],
            peak_values: vec![0.0; count],
            signs: vec![1; count],
            changed_count: count,
        }
    }
}

/// Partial delay filter of one record: the record spectrum contracted against
/// the HOS weighting filter, `G_j[w1] = sum_w2 X_j[w2] X_j*[(w1+w2) mod T] H(w1,w2)`
/// (one more contraction index at fourth order).
pub fn partial_delay_spectrum(xj: &[Complex64], filter: &HosFilter) -> HosdResult<Vec<Complex64>> {
    filter.contract_record(xj)
}

/// Phase-compensated average of per-record partial filters. Each partial is
/// rotated into the common frame by its record's lag before averaging, so that
/// records estimated at different delays reinforce rather than cancel.
pub fn average_delay_filter(
    partials: &[Vec<Complex64>],
    delays: &DelayEstimates,
    iteration: usize,
) -> HosdResult<DelayFilter> {
    if partials.is_empty() {
        return Err(HosdError::InvalidInput("no partial filters".into()));
    }
    if partials.len() != delays.lags.len() {
        return Err(HosdError::DimensionMismatch {
            expected: partials.len(),
            actual: delays.lags.len(),
        });
    }
    let t = partials[0].len();
    for p in partials {
        if p.len() != t {
            return Err(HosdError::DimensionMismatch {
                expected: t,
                actual: p.len(),
            });
        }
    }
    if let Some(&bad) = delays.lags.iter().find(|&&lag| lag >= t) {
        return Err(HosdError::InvalidInput(format!(
            "lag {bad} out of range for record length {t}"
        )));
    }
    let mut freq = vec![Complex64::new(0.0, 0.0); t];
    for (partial, &lag) in partials.iter().zip(delays.lags.iter()) {
        if lag == 0 {
            for (dst, v) in freq.iter_mut().zip(partial.iter()) {
                *dst += v;
            }
        } else {
            let step = -std::f64::consts::TAU * lag as f64 / t as f64;
            for (w, (dst, v)) in freq.iter_mut().zip(partial.iter()).enumerate() {
                *dst += v * Complex64::from_polar(1.0, step * w as f64);
            }
        }
    }
    let scale = 1.0 / partials.len() as f64;
    for v in &mut freq {
        *v *= scale;
    }
    Ok(DelayFilter::from_freq(freq, iteration))
}

/// Peak of a filter output: argmax for odd orders, argmax of the absolute
/// value for even orders. Ties break toward the smallest index; an all-zero
/// output returns lag 0.
pub fn peak_of_output(r: &[f64], order: HosOrder) -> (usize, f64, i8) {
    let mut best_t = 0usize;
    let mut best_key = f64::NEG_INFINITY;
    for (t, &v) in r.iter().enumerate() {
        let key = if order.is_even() { v.abs() } else { v };
        if key > best_key {
            best_key = key;
            best_t = t;
        }
    }
    let value = r[best_t];
    let sign = if order.is_even() && value < 0.0 { -1 } else { 1 };
    (best_t, value, sign)
}

/// Applies the filter to a record and reads off the peak.
pub fn detect_peak(
    filter: &DelayFilter,
    x: &[f64],
    order: HosOrder,
) -> HosdResult<(usize, f64, i8)> {
    let r = filter.apply(x)?;
    Ok(peak_of_output(&r, order))
}

/// Configuration for iterated realignment.
#[derive(Debug, Clone)]
pub struct AlignConfig {
    pub order: HosOrder,
    pub max_iterations: usize,
    /// Stop once the fraction of records whose lag changed is at or below this.
    pub convergence_fraction: f64,
    pub normalization: Normalization,
    pub quasi_cumulant_width: usize,
    /// Optional bandwidth cap W in bins.
    pub bandwidth: Option<usize>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            order: HosOrder::Bispectrum,
            max_iterations: 25,
            convergence_fraction: 0.02,
            normalization: Normalization::MagnitudeWeightedBiasCorrected,
            quasi_cumulant_width: 1,
            bandwidth: None,
        }
    }
}

impl AlignConfig {
    fn hos_config(&self) -> HosEstimationConfig {
        HosEstimationConfig {
            order: self.order,
            normalization: self.normalization,
            quasi_cumulant_width: self.quasi_cumulant_width,
            bandwidth: self.bandwidth,
        }
    }
}

/// Lag state after one realignment iteration.
#[derive(Debug, Clone)]
pub struct IterationSnapshot {
    pub changed: usize,
    pub lags: Vec<usize>,
}

/// Outcome of iterated realignment.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub filter: DelayFilter,
    pub delays: DelayEstimates,
    pub history: Vec<IterationSnapshot>,
    /// False when the iteration cap was reached before the lag set settled.
    pub converged: bool,
}

/// Iterated realignment: re-estimate the HOS filter on the realigned
/// ensemble, average the partial delay filters in the common frame, update
/// each record's lag from the filter-output peak, and repeat until the
/// fraction of moving lags drops below the configured threshold.
///
/// Hitting the iteration cap is not an error; it is reported through
/// `converged` and the iteration history.
pub fn iterate_alignment(
    ensemble: &RecordEnsemble,
    config: &AlignConfig,
) -> HosdResult<AlignmentResult> {
    let spectra = fft_records(ensemble);
    iterate_alignment_spectra(&spectra, config)
}

/// Realignment on precomputed spectra; `iterate_alignment` is the usual entry.
pub fn iterate_alignment_spectra(
    spectra: &SpectrumSet,
    config: &AlignConfig,
) -> HosdResult<AlignmentResult> {
    let l = spectra.num_records();
    let t = spectra.record_len();
    if l < 2 {
        return Err(HosdError::InvalidInput(
            "iterated realignment needs at least 2 records".into(),
        ));
    }
    if config.max_iterations == 0 {
        return Err(HosdError::InvalidInput("max_iterations must be positive".into()));
    }
    let hos_cfg = config.hos_config();
    let fft = FftPair::new(t);

    let mut delays = DelayEstimates::zeros(l);
    let mut history = Vec::new();
    let mut converged = false;
    let mut filter = DelayFilter::from_freq(vec![Complex64::new(0.0, 0.0); t], 0);

    for iteration in 0..config.max_iterations {
        let aligned = spectra.aligned(&delays.lags);
        let hos_filter = estimate_hos_filter(&aligned, &hos_cfg)?;

        // Partials of the aligned records already sit in the common frame,
        // so the average needs no further rotation (lags zero).
        let mut freq = vec![Complex64::new(0.0, 0.0); t];
        for j in 0..l {
            let partial = hos_filter.contract_record(aligned.record(j).as_slice().unwrap())?;
            for (dst, v) in freq.iter_mut().zip(partial.iter()) {
                *dst += v;
            }
        }
        let scale = 1.0 / l as f64;
        for v in &mut freq {
            *v *= scale;
        }
        filter = DelayFilter::from_freq(freq, iteration + 1);

        let mut changed = 0usize;
        for j in 0..l {
            let r = filter.apply_spectrum(aligned.record(j).as_slice().unwrap(), &fft);
            let (delta, value, sign) = peak_of_output(&r, config.order);
            if delta % t != 0 {
                changed += 1;
            }
            delays.lags[j] = (delays.lags[j] + delta) % t;
            delays.peak_values[j] = value;
            delays.signs[j] = sign;
        }
        delays.changed_count = changed;
        history.push(IterationSnapshot {
            changed,
            lags: delays.lags.clone(),
        });
        if (changed as f64) <= config.convergence_fraction * l as f64 {
            converged = true;
            break;
        }
    }

    Ok(AlignmentResult {
        filter,
        delays,
        history,
        converged,
    })
}
