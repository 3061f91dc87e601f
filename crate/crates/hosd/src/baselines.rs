//! Second-order comparison methods: pairwise cross-correlation delays with
//! SVD phase recovery, and Woody's iterative template alignment.

use ndarray::Array2;
use num_complex::Complex64;

use crate::delay::{peak_of_output, DelayEstimates};
use crate::ensemble::RecordEnsemble;
use crate::error::{HosdError, HosdResult};
use crate::fft::FftPair;
use crate::hos::HosOrder;

/// Pairwise circular lags and their unit-phase encoding.
#[derive(Debug, Clone)]
pub struct PairwiseDelayMatrix {
    /// Circular lags `dt_jk` in `0..T`, antisymmetric mod T.
    pub lags: Array2<usize>,
    /// `exp(2 pi i dt_jk / T)`, Hermitian by construction.
    pub phase: Array2<Complex64>,
    pub record_len: usize,
}

/// Delay of record j relative to record k from the argmax of their circular
/// cross-correlation, for every pair. Only the upper triangle is computed;
/// the lower is filled by the antisymmetry convention.
pub fn pairwise_xcorr_delays(ensemble: &RecordEnsemble) -> HosdResult<PairwiseDelayMatrix> {
    let l = ensemble.num_records();
    if l < 2 {
        return Err(HosdError::InvalidInput(
            "pairwise delays need at least 2 records".into(),
        ));
    }
    let t = ensemble.record_len();
    let fft = FftPair::new(t);
    let spectra: Vec<Vec<Complex64>> = (0..l)
        .map(|j| fft.forward_real(ensemble.record(j).as_slice().unwrap()))
        .collect();

    let mut lags = Array2::<usize>::zeros((l, l));
    for j in 0..l {
        for k in (j + 1)..l {
            // Circular cross-correlation c(t) = sum_s x_j((s + t) mod T) x_k(s),
            // peaked at the delay of j relative to k.
            let product: Vec<Complex64> = spectra[j]
                .iter()
                .zip(spectra[k].iter())
                .map(|(a, b)| a * b.conj())
                .collect();
            let c = fft.inverse_real(&product);
            let (lag, _, _) = peak_of_output(&c, HosOrder::Bispectrum);
            lags[(j, k)] = lag;
            lags[(k, j)] = (t - lag) % t;
        }
    }
    let phase = lags.mapv(|lag| {
        Complex64::from_polar(1.0, std::f64::consts::TAU * lag as f64 / t as f64)
    });
    Ok(PairwiseDelayMatrix {
        lags,
        phase,
        record_len: t,
    })
}

/// Per-record delays recovered from the phases of the leading singular
/// vector of the pairwise phase matrix.
#[derive(Debug, Clone)]
pub struct SvdDelays {
    /// Lags in `0..T`, unique up to a common offset.
    pub lags: Vec<usize>,
    /// Ratio of the two leading singular values.
    pub singular_ratio: f64,
    /// Set when the leading subspace is nearly degenerate (ratio < 1.05).
    pub low_confidence: bool,
}

/// Recovers per-record lags from a unit-modulus phase matrix via its leading
/// singular vector: `lag_j = round(T * angle(u_j) / 2 pi) mod T`. Power
/// iteration suffices at the L x L scales involved.
pub fn svd_phase_delays(phase: &Array2<Complex64>, record_len: usize) -> HosdResult<SvdDelays> {
    let l = phase.nrows();
    if phase.ncols() != l {
        return Err(HosdError::DimensionMismatch {
            expected: l,
            actual: phase.ncols(),
        });
    }
    if l < 2 {
        return Err(HosdError::InvalidInput("phase matrix must be at least 2x2".into()));
    }
    for v in phase.iter() {
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(HosdError::InvalidInput(
                "phase matrix entries must have unit modulus".into(),
            ));
        }
    }

    let (sigma1, u) = leading_singular_pair(phase);
    // Deflate and take the next singular value for the confidence check.
    let v = right_vector(phase, &u, sigma1);
    let mut deflated = phase.clone();
    for j in 0..l {
        for k in 0..l {
            deflated[(j, k)] -= sigma1 * u[j] * v[k].conj();
        }
    }
    let (sigma2, _) = leading_singular_pair(&deflated);
    let ratio = if sigma2 > 0.0 { sigma1 / sigma2 } else { f64::INFINITY };

    let t = record_len as f64;
    let lags = u
        .iter()
        .map(|c| {
            let angle = c.arg();
            let lag = (t * angle / std::f64::consts::TAU).round() as i64;
            lag.rem_euclid(record_len as i64) as usize
        })
        .collect();
    Ok(SvdDelays {
        lags,
        singular_ratio: ratio,
        low_confidence: ratio < 1.05,
    })
}

/// Leading singular value and left singular vector by power iteration on
/// `A A^H`.
fn leading_singular_pair(a: &Array2<Complex64>) -> (f64, Vec<Complex64>) {
    let l = a.nrows();
    // Deterministic start with a small asymmetry so we never sit exactly
    // orthogonal to the leading vector.
    let mut u: Vec<Complex64> = (0..l)
        .map(|j| Complex64::new(1.0, 0.1 * (j as f64 + 1.0) / l as f64))
        .collect();
    normalize(&mut u);
    let mut sigma = 0.0_f64;
    for _ in 0..300 {
        // w = A^H u, then u' = A w.
        let mut w = vec![Complex64::new(0.0, 0.0); a.ncols()];
        for j in 0..l {
            let uj = u[j];
            for k in 0..a.ncols() {
                w[k] += a[(j, k)].conj() * uj;
            }
        }
        let mut next = vec![Complex64::new(0.0, 0.0); l];
        for j in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..a.ncols() {
                acc += a[(j, k)] * w[k];
            }
            next[j] = acc;
        }
        let norm = vec_norm(&next);
        if norm == 0.0 {
            return (0.0, u);
        }
        for v in &mut next {
            *v /= norm;
        }
        let delta: f64 = next
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        u = next;
        sigma = norm.sqrt(); // ||A A^H u|| = sigma^2 at the fixed point
        if delta < 1e-14 {
            break;
        }
    }
    (sigma, u)
}

/// `v = A^H u / sigma`, so that `A ~ sigma u v^H`.
fn right_vector(a: &Array2<Complex64>, u: &[Complex64], sigma: f64) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); a.ncols()];
    for j in 0..a.nrows() {
        let uj = u[j];
        for k in 0..a.ncols() {
            v[k] += a[(j, k)].conj() * uj;
        }
    }
    if sigma > 0.0 {
        for x in &mut v {
            *x /= sigma;
        }
    }
    v
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = vec_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Woody's algorithm: alternate between a delay-compensated average template
/// and per-record realignment to the template, until the lags fix or
/// `max_iter` passes. Peak values are normalized correlations, so a low mean
/// peak value flags a meaningless alignment.
pub fn woody_align(ensemble: &RecordEnsemble, max_iter: usize) -> HosdResult<DelayEstimates> {
    let l = ensemble.num_records();
    if l < 2 {
        return Err(HosdError::InvalidInput(
            "Woody alignment needs at least 2 records".into(),
        ));
    }
    let t = ensemble.record_len();
    let fft = FftPair::new(t);
    let spectra: Vec<Vec<Complex64>> = (0..l)
        .map(|j| fft.forward_real(ensemble.record(j).as_slice().unwrap()))
        .collect();
    let record_norms: Vec<f64> = (0..l)
        .map(|j| {
            ensemble
                .record(j)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let mut delays = DelayEstimates::zeros(l);
    for _ in 0..max_iter.max(1) {
        // Template spectrum: mean of spectra advanced by current lags.
        let mut template = vec![Complex64::new(0.0, 0.0); t];
        for j in 0..l {
            let lag = delays.lags[j];
            let step = std::f64::consts::TAU * lag as f64 / t as f64;
            for (w, (dst, src)) in template.iter_mut().zip(spectra[j].iter()).enumerate() {
                *dst += src * Complex64::from_polar(1.0, step * w as f64);
            }
        }
        for v in &mut template {
            *v /= l as f64;
        }
        let template_norm = (template.iter().map(|v| v.norm_sqr()).sum::<f64>() / t as f64).sqrt();

        let mut changed = 0usize;
        for j in 0..l {
            // Cross-correlation of the template with record j peaks at the
            // record's delay.
            let product: Vec<Complex64> = spectra[j]
                .iter()
                .zip(template.iter())
                .map(|(x, h)| x * h.conj())
                .collect();
            let c = fft.inverse_real(&product);
            let (lag, value, _) = peak_of_output(&c, HosOrder::Bispectrum);
            if lag != delays.lags[j] {
                changed += 1;
            }
            delays.lags[j] = lag;
            let denom = template_norm * record_norms[j];
            delays.peak_values[j] = if denom > 0.0 { value / denom } else { 0.0 };
        }
        delays.changed_count = changed;
        if changed == 0 {
            break;
        }
    }
    Ok(delays)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::delay_circular;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump(t: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..t).map(|_| rng.random::<f64>() - 0.5).collect();
        // Light smoothing so correlations have a clean peak.
        (0..t)
            .map(|i| (0..5).map(|k| raw[(i + k) % t]).sum::<f64>() / 5.0)
            .collect()
    }

    fn shifted_ensemble(waveform: &[f64], shifts: &[usize]) -> RecordEnsemble {
        let rows: Vec<Vec<f64>> = shifts.iter().map(|&s| delay_circular(waveform, s)).collect();
        RecordEnsemble::from_rows(&rows, 1.0).unwrap()
    }

    #[test]
    fn identical_records_have_zero_pairwise_lags() {
        let w = bump(32, 1);
        let e = shifted_ensemble(&w, &[0, 0, 0]);
        let m = pairwise_xcorr_delays(&e).unwrap();
        assert!(m.lags.iter().all(|&v| v == 0));
        assert!(m
            .phase
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn pairwise_lags_are_antisymmetric_and_consistent() {
        let t = 32usize;
        let w = bump(t, 2);
        let shifts = vec![0usize, 5, 20, 31];
        let e = shifted_ensemble(&w, &shifts);
        let m = pairwise_xcorr_delays(&e).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(m.lags[(j, k)], (t - m.lags[(k, j)]) % t);
                let expected = (shifts[j] + t - shifts[k]) % t;
                assert_eq!(m.lags[(j, k)], expected, "pair ({j},{k})");
                assert!((m.phase[(j, k)].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_phase_matrix_is_rank_one() {
        let t = 64usize;
        let w = bump(t, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shifts: Vec<usize> = (0..8).map(|_| rng.random_range(0..t)).collect();
        let e = shifted_ensemble(&w, &shifts);
        let m = pairwise_xcorr_delays(&e).unwrap();
        let (sigma1, u) = leading_singular_pair(&m.phase);
        assert!(sigma1 >= 8.0 - 1e-6);
        let v = right_vector(&m.phase, &u, sigma1);
        let mut residual = 0.0_f64;
        for j in 0..8 {
            for k in 0..8 {
                residual += (m.phase[(j, k)] - sigma1 * u[j] * v[k].conj()).norm_sqr();
            }
        }
        assert!(residual.sqrt() < 1e-8, "rank-1 residual {}", residual.sqrt());
    }

    #[test]
    fn svd_recovers_shifts_up_to_common_offset() {
        let t = 64usize;
        let w = bump(t, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shifts: Vec<usize> = (0..8).map(|_| rng.random_range(0..t)).collect();
        let e = shifted_ensemble(&w, &shifts);
        let m = pairwise_xcorr_delays(&e).unwrap();
        let result = svd_phase_delays(&m.phase, t).unwrap();
        assert!(!result.low_confidence);
        let offset = (result.lags[0] + t - shifts[0]) % t;
        for (lag, &s) in result.lags.iter().zip(shifts.iter()) {
            assert_eq!((lag + t - s) % t, offset);
        }
    }

    #[test]
    fn all_ones_phase_matrix_gives_common_lags_flagged_or_not() {
        let phi = Array2::from_elem((6, 6), Complex64::new(1.0, 0.0));
        let result = svd_phase_delays(&phi, 32).unwrap();
        assert!(result.lags.iter().all(|&l| l == result.lags[0]));
    }

    #[test]
    fn svd_rejects_bad_inputs() {
        let phi = Array2::from_elem((3, 3), Complex64::new(0.5, 0.0));
        assert!(svd_phase_delays(&phi, 32).is_err());
    }

    #[test]
    fn common_offset_gauge_for_both_baselines() {
        let t = 64usize;
        let w = bump(t, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shifts: Vec<usize> = (0..6).map(|_| rng.random_range(0..t)).collect();
        let offset = 11usize;
        let shifted: Vec<usize> = shifts.iter().map(|&s| (s + offset) % t).collect();

        let e1 = shifted_ensemble(&w, &shifts);
        let e2 = shifted_ensemble(&w, &shifted);

        let svd1 = svd_phase_delays(&pairwise_xcorr_delays(&e1).unwrap().phase, t).unwrap();
        let svd2 = svd_phase_delays(&pairwise_xcorr_delays(&e2).unwrap().phase, t).unwrap();
        let d0 = (svd2.lags[0] + t - svd1.lags[0]) % t;
        for (a, b) in svd1.lags.iter().zip(svd2.lags.iter()) {
            assert_eq!((b + t - a) % t, d0);
        }

        let w1 = woody_align(&e1, 50).unwrap();
        let w2 = woody_align(&e2, 50).unwrap();
        let d0 = (w2.lags[0] + t - w1.lags[0]) % t;
        for (a, b) in w1.lags.iter().zip(w2.lags.iter()) {
            assert_eq!((b + t - a) % t, d0);
        }
    }

    #[test]
    fn woody_finds_exact_lags_for_noiseless_copies() {
        let t = 64usize;
        let w = bump(t, 9);
        let shifts = vec![0usize, 10, 25, 40, 55];
        let e = shifted_ensemble(&w, &shifts);
        let delays = woody_align(&e, 50).unwrap();
        assert_eq!(delays.changed_count, 0, "should have converged");
        let offset = (delays.lags[0] + t - shifts[0]) % t;
        for (lag, &s) in delays.lags.iter().zip(shifts.iter()) {
            assert_eq!((lag + t - s) % t, offset);
        }
        // Matched template: normalized peak correlations near 1.
        for &v in &delays.peak_values {
            assert!(v > 0.9, "peak correlation {v}");
        }
    }

    #[test]
    fn woody_on_noise_reports_low_peak_correlation() {
        let t = 128usize;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..t).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let e = RecordEnsemble::from_rows(&rows, 1.0).unwrap();
        let delays = woody_align(&e, 50).unwrap();
        let mean_peak =
            delays.peak_values.iter().sum::<f64>() / delays.peak_values.len() as f64;
        assert!(
            mean_peak < 0.8,
            "noise alignment should not look like a clean match ({mean_peak})"
        );
    }
}
