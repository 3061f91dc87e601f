//! Real-time variant: running-average estimates of the bispectrum, its
//! magnitude-weighted denominator and the delay filter, gated by a detection
//! rule.
//!
//! `push_record` is the single mutator and must be called serially; a state
//! snapshot may be moved freely between pushes.

use std::collections::VecDeque;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{HosdError, HosdResult};
use crate::fft::{band_bins, FftPair};
use crate::hos::{quasi_cumulant_excluded_k3, HosOrder};
use crate::reconstruction::select_threshold;

/// Streaming configuration. Learning rates apply only when the gate is open;
/// a closed gate freezes every running grid.
#[derive(Debug, Clone)]
pub struct StreamConfig {
    /// Learning rate for the bispectrum and denominator grids.
    pub lambda: f64,
    /// Learning rate for the delay filter.
    pub alpha: f64,
    /// False positive rate driving the adaptive threshold.
    pub false_positive_rate: f64,
    pub quasi_cumulant_width: usize,
    pub bandwidth: Option<usize>,
    /// Fixed detection threshold; disables the adaptive calibration buffer.
    pub theta_override: Option<f64>,
    /// Number of recent sub-gate filter outputs kept for calibration.
    pub calibration_capacity: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            lambda: 0.05,
            alpha: 0.05,
            false_positive_rate: 0.05,
            quasi_cumulant_width: 1,
            bandwidth: None,
            theta_override: None,
            calibration_capacity: 32,
        }
    }
}

/// What a single push produced.
#[derive(Debug, Clone, Copy)]
pub struct DetectionEvent {
    pub detected: bool,
    /// Argmax of the filter output.
    pub lag: usize,
    /// Maximum of the filter output.
    pub score: f64,
    /// Threshold the gate was tested against.
    pub theta: f64,
}

/// Hard detection gate: open iff `max r > theta`.
pub fn detection_gate(r: &[f64], theta: f64) -> bool {
    r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > theta
}

/// Running-average state for third-order streaming estimation.
#[derive(Debug, Clone)]
pub struct StreamState {
    record_len: usize,
    config: StreamConfig,
    b_run: Array2<Complex64>,
    sqrt_d_run: Array2<f64>,
    g_run: Vec<Complex64>,
    theta: f64,
    records_seen: usize,
    calibration: VecDeque<Vec<f64>>,
    band: Vec<usize>,
}

impl StreamState {
    pub fn new(record_len: usize, config: StreamConfig) -> HosdResult<Self> {
        if record_len < crate::ensemble::MIN_RECORD_LEN {
            return Err(HosdError::InvalidInput(format!(
                "record length {record_len} is below the minimum"
            )));
        }
        for (name, rate) in [("lambda", config.lambda), ("alpha", config.alpha)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(HosdError::InvalidInput(format!(
                    "learning rate {name} must lie in [0, 1]"
                )));
            }
        }
        let theta = config.theta_override.unwrap_or(f64::INFINITY);
        let band = band_bins(record_len, config.bandwidth);
        Ok(StreamState {
            record_len,
            config,
            b_run: Array2::zeros((record_len, record_len)),
            sqrt_d_run: Array2::zeros((record_len, record_len)),
            g_run: vec![Complex64::new(0.0, 0.0); record_len],
            theta,
            records_seen: 0,
            calibration: VecDeque::new(),
            band,
        })
    }

    pub fn record_len(&self) -> usize {
        self.record_len
    }

    pub fn records_seen(&self) -> usize {
        self.records_seen
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn bispectrum_run(&self) -> &Array2<Complex64> {
        &self.b_run
    }

    pub fn sqrt_denominator_run(&self) -> &Array2<f64> {
        &self.sqrt_d_run
    }

    pub fn delay_filter_run(&self) -> &[Complex64] {
        &self.g_run
    }

    /// Ingests one record: filter, gate, and (when the gate opens or on the
    /// bootstrap record) update the running grids. Sub-gate records feed the
    /// threshold calibration buffer instead.
    pub fn push_record(&mut self, x: &[f64]) -> HosdResult<DetectionEvent> {
        if x.len() != self.record_len {
            return Err(HosdError::DimensionMismatch {
                expected: self.record_len,
                actual: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(HosdError::InvalidInput("record contains a non-finite sample".into()));
        }
        let t = self.record_len;
        let fft = FftPair::new(t);
        let spectrum = fft.forward_real(x);

        // Filter with the current running estimate.
        let product: Vec<Complex64> = self
            .g_run
            .iter()
            .zip(spectrum.iter())
            .map(|(g, s)| g * s)
            .collect();
        let r = fft.inverse_real(&product);
        let (lag, _, _) = crate::delay::peak_of_output(&r, HosOrder::Bispectrum);
        let score = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let theta_used = self.theta;
        let detected = detection_gate(&r, theta_used);

        let bootstrap = self.records_seen == 0;
        let lambda = if bootstrap {
            1.0
        } else if detected {
            self.config.lambda
        } else {
            0.0
        };
        let alpha = if bootstrap {
            1.0
        } else if detected {
            self.config.alpha
        } else {
            0.0
        };

        if lambda > 0.0 {
            self.update_grids(&spectrum, lambda);
        }
        if alpha > 0.0 {
            self.update_delay_filter(&spectrum, lag, alpha);
        }
        if !detected && !bootstrap && self.config.theta_override.is_none() {
            self.calibrate_with(r);
        }
        self.records_seen += 1;

        Ok(DetectionEvent {
            detected,
            lag,
            score,
            theta: theta_used,
        })
    }

    fn update_grids(&mut self, spectrum: &[Complex64], lambda: f64) {
        let t = self.record_len;
        let keep = 1.0 - lambda;
        for &w1 in &self.band {
            for &w2 in &self.band {
                let triple = spectrum[w1] * spectrum[w2] * spectrum[(w1 + w2) % t].conj();
                let b = &mut self.b_run[(w1, w2)];
                *b = *b * keep + triple * lambda;
                let d = &mut self.sqrt_d_run[(w1, w2)];
                *d = *d * keep + triple.norm() * lambda;
            }
        }
    }

    fn update_delay_filter(&mut self, spectrum: &[Complex64], lag: usize, alpha: f64) {
        let t = self.record_len;
        // Regularized weighting filter from the running grids.
        let mut max_d = 0.0_f64;
        for &w1 in &self.band {
            for &w2 in &self.band {
                let d = self.sqrt_d_run[(w1, w2)];
                max_d = max_d.max(d * d);
            }
        }
        let reg = 1e-12 * max_d;

        // Partial delay filter of this record, phase-compensated into the
        // filter's frame by the detected lag.
        let mut partial = vec![Complex64::new(0.0, 0.0); t];
        for &w1 in &self.band {
            if w1 == 0 {
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for &w2 in &self.band {
                if quasi_cumulant_excluded_k3(w1, w2, t, self.config.quasi_cumulant_width) {
                    continue;
                }
                let sqrt_d = self.sqrt_d_run[(w1, w2)];
                let denom = sqrt_d * sqrt_d + reg;
                if denom <= 0.0 {
                    continue;
                }
                let h = self.b_run[(w1, w2)].conj() / denom;
                acc += spectrum[w2] * spectrum[(w1 + w2) % t].conj() * h;
            }
            partial[w1] = acc;
        }
        if lag != 0 {
            let step = -std::f64::consts::TAU * lag as f64 / t as f64;
            for (w, v) in partial.iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, step * w as f64);
            }
        }
        let keep = 1.0 - alpha;
        for (g, p) in self.g_run.iter_mut().zip(partial.iter()) {
            *g = *g * keep + p * alpha;
        }
    }

    fn calibrate_with(&mut self, output: Vec<f64>) {
        // Degenerate all-zero outputs (filter not yet formed) are useless for
        // calibration.
        if output.iter().all(|&v| v == 0.0) {
            return;
        }
        if self.calibration.len() == self.config.calibration_capacity {
            self.calibration.pop_front();
        }
        self.calibration.push_back(output);
        let concatenated: Vec<f64> = self.calibration.iter().flatten().copied().collect();
        if let Ok(selection) = select_threshold(&concatenated, self.config.false_positive_rate) {
            self.theta = selection.threshold;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{average_delay_filter, partial_delay_spectrum, DelayEstimates};
    use crate::ensemble::RecordEnsemble;
    use crate::hos::{estimate_hos_filter, HosEstimationConfig, Normalization};
    use crate::spectra::fft_records;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_record(t: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    fn open_gate_config(lambda: f64, alpha: f64) -> StreamConfig {
        StreamConfig {
            lambda,
            alpha,
            theta_override: Some(f64::NEG_INFINITY),
            quasi_cumulant_width: 1,
            ..Default::default()
        }
    }

    /// Batch single-record reference: bispectrum, sqrt denominator and the
    /// phase-compensated partial built from the public batch estimators.
    fn batch_single_record(
        x: &[f64],
        lag: usize,
        delta_w: usize,
    ) -> (Array2<Complex64>, Array2<f64>, Vec<Complex64>) {
        let e = RecordEnsemble::from_rows(&[x.to_vec()], 1.0).unwrap();
        let s = fft_records(&e);
        let b = crate::hos::estimate_bispectrum(&s, None).unwrap();
        let d = crate::hos::estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        let h = estimate_hos_filter(
            &s,
            &HosEstimationConfig {
                normalization: Normalization::MagnitudeWeighted,
                quasi_cumulant_width: delta_w,
                ..Default::default()
            },
        )
        .unwrap();
        let partial = partial_delay_spectrum(s.record(0).as_slice().unwrap(), &h).unwrap();
        let mut delays = DelayEstimates::zeros(1);
        delays.lags[0] = lag;
        let g = average_delay_filter(&[partial], &delays, 0).unwrap();
        (b.values, d.mapv(f64::sqrt), g.freq)
    }

    #[test]
    fn full_replacement_matches_last_record_batch_estimate() {
        let t = 16usize;
        let mut state = StreamState::new(t, open_gate_config(1.0, 1.0)).unwrap();
        let mut last_event = None;
        let mut last = Vec::new();
        for seed in 0..4u64 {
            last = random_record(t, seed);
            last_event = Some(state.push_record(&last).unwrap());
        }
        let lag = last_event.unwrap().lag;
        let (b, sqrt_d, g) = batch_single_record(&last, lag, 1);
        for w1 in 0..t {
            for w2 in 0..t {
                let scale = b[(w1, w2)].norm().max(1.0);
                assert!((state.bispectrum_run()[(w1, w2)] - b[(w1, w2)]).norm() / scale < 1e-9);
                assert!(
                    (state.sqrt_denominator_run()[(w1, w2)] - sqrt_d[(w1, w2)]).abs() / scale
                        < 1e-9
                );
            }
        }
        for (a, bv) in state.delay_filter_run().iter().zip(g.iter()) {
            assert!((a - bv).norm() < 1e-9 * bv.norm().max(1.0));
        }
    }

    #[test]
    fn closed_gate_freezes_state_after_bootstrap() {
        let t = 16usize;
        let cfg = StreamConfig {
            theta_override: Some(f64::INFINITY),
            ..Default::default()
        };
        let mut state = StreamState::new(t, cfg).unwrap();
        state.push_record(&random_record(t, 0)).unwrap();
        let b_after_first = state.bispectrum_run().clone();
        let g_after_first = state.delay_filter_run().to_vec();
        for seed in 1..6u64 {
            let ev = state.push_record(&random_record(t, seed)).unwrap();
            assert!(!ev.detected);
        }
        assert_eq!(state.bispectrum_run(), &b_after_first);
        assert_eq!(state.delay_filter_run(), &g_after_first[..]);
    }

    #[test]
    fn repeated_record_converges_to_its_single_record_estimate() {
        let t = 16usize;
        let x = random_record(t, 33);
        let mut state = StreamState::new(t, open_gate_config(0.1, 0.1)).unwrap();
        let mut lag = 0usize;
        for _ in 0..300 {
            lag = state.push_record(&x).unwrap().lag;
        }
        let (b, sqrt_d, g) = batch_single_record(&x, lag, 1);
        let b_err = state
            .bispectrum_run()
            .iter()
            .zip(b.iter())
            .map(|(a, e)| (a - e).norm())
            .fold(0.0_f64, f64::max);
        let b_scale = b.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        assert!(b_err / b_scale < 1e-6, "bispectrum error {b_err}");
        let d_err = state
            .sqrt_denominator_run()
            .iter()
            .zip(sqrt_d.iter())
            .map(|(a, e)| (a - e).abs())
            .fold(0.0_f64, f64::max);
        assert!(d_err / b_scale < 1e-6);
        let g_err = state
            .delay_filter_run()
            .iter()
            .zip(g.iter())
            .map(|(a, e)| (a - e).norm())
            .fold(0.0_f64, f64::max);
        let g_scale = g.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        assert!(g_err / g_scale < 1e-6, "filter error {g_err}");
    }

    #[test]
    fn running_grids_stay_in_convex_hull_of_observations() {
        let t = 16usize;
        let mut state = StreamState::new(t, open_gate_config(0.3, 0.3)).unwrap();
        let mut max_triple = Array2::<f64>::zeros((t, t));
        for seed in 0..20u64 {
            let x = random_record(t, seed);
            let fft = FftPair::new(t);
            let s = fft.forward_real(&x);
            for w1 in 0..t {
                for w2 in 0..t {
                    let triple = (s[w1] * s[w2] * s[(w1 + w2) % t].conj()).norm();
                    max_triple[(w1, w2)] = max_triple[(w1, w2)].max(triple);
                }
            }
            state.push_record(&x).unwrap();
            for w1 in 0..t {
                for w2 in 0..t {
                    assert!(
                        state.bispectrum_run()[(w1, w2)].norm()
                            <= max_triple[(w1, w2)] * (1.0 + 1e-9)
                    );
                    assert!(
                        state.sqrt_denominator_run()[(w1, w2)]
                            <= max_triple[(w1, w2)] * (1.0 + 1e-9)
                    );
                }
            }
        }
    }

    #[test]
    fn gate_is_monotone_in_threshold() {
        let t = 32usize;
        let records: Vec<Vec<f64>> = (0..30).map(|s| random_record(t, 500 + s)).collect();
        let mut detections_at = |theta: f64| -> usize {
            let cfg = StreamConfig {
                theta_override: Some(theta),
                ..Default::default()
            };
            let mut state = StreamState::new(t, cfg).unwrap();
            let mut count = 0;
            for x in &records {
                if state.push_record(x).unwrap().detected {
                    count += 1;
                }
            }
            count
        };
        let low = detections_at(0.0);
        let mid = detections_at(0.5);
        let high = detections_at(5.0);
        assert!(low >= mid && mid >= high);
    }

    #[test]
    fn trivial_gate_cases() {
        assert!(!detection_gate(&[0.0, 0.0], 1.0));
        assert!(detection_gate(&[0.0, 2.0], 1.0));
    }
}
