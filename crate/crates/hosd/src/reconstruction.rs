//! Waveform recovery, skewness-based threshold selection and component
//! signal reconstruction.

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::delay::{DelayEstimates, DelayFilter};
use crate::ensemble::RecordEnsemble;
use crate::error::{HosdError, HosdResult};
use crate::fft::FftPair;
use crate::hos::HosOrder;

/// A recovered additive component.
#[derive(Debug, Clone)]
pub struct Component {
    /// Estimated waveform, length T.
    pub waveform: Vec<f64>,
    /// Detection filter that recovered it.
    pub filter: DelayFilter,
    /// Hard detection threshold applied to the filter output.
    pub threshold: f64,
    /// Least-squares amplitude applied to the reconstruction.
    pub scale: f64,
    /// Per-record delays at convergence.
    pub delays: DelayEstimates,
    /// Position in the deflation order.
    pub index: usize,
}

/// Delay-compensated average of the records:
/// `f(t) = (1/L) sum_j sign_j x_j((t + lag_j) mod T)`.
pub fn recover_waveform(ensemble: &RecordEnsemble, delays: &DelayEstimates) -> HosdResult<Vec<f64>> {
    let l = ensemble.num_records();
    let t = ensemble.record_len();
    if delays.lags.len() != l {
        return Err(HosdError::DimensionMismatch {
            expected: l,
            actual: delays.lags.len(),
        });
    }
    if let Some(&bad) = delays.lags.iter().find(|&&lag| lag >= t) {
        return Err(HosdError::InvalidInput(format!(
            "lag {bad} out of range for record length {t}"
        )));
    }
    let mut waveform = vec![0.0; t];
    for j in 0..l {
        let record = ensemble.record(j);
        let lag = delays.lags[j];
        let sign = delays.signs.get(j).copied().unwrap_or(1) as f64;
        for (i, w) in waveform.iter_mut().enumerate() {
            *w += sign * record[(i + lag) % t];
        }
    }
    for w in &mut waveform {
        *w /= l as f64;
    }
    Ok(waveform)
}

/// Skewness of the samples at or below `theta`, from raw moments:
/// `(m3 - 3 m2 m1 + 2 m1^3) / (m2 - m1^2)^(3/2)`.
pub fn subthreshold_skewness(r: &[f64], theta: f64) -> HosdResult<f64> {
    let mut n = 0usize;
    let (mut m1, mut m2, mut m3) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &v in r {
        if v <= theta {
            n += 1;
            m1 += v;
            m2 += v * v;
            m3 += v * v * v;
        }
    }
    if n < 3 {
        return Err(HosdError::Degenerate(format!(
            "only {n} sub-threshold samples; need at least 3"
        )));
    }
    let nf = n as f64;
    m1 /= nf;
    m2 /= nf;
    m3 /= nf;
    let variance = m2 - m1 * m1;
    if variance <= 0.0 {
        return Err(HosdError::Degenerate(
            "zero variance among sub-threshold samples".into(),
        ));
    }
    Ok((m3 - 3.0 * m2 * m1 + 2.0 * m1 * m1 * m1) / variance.powf(1.5))
}

/// Large-sample skewness bound `Phi^{-1}(1 - fp) * sqrt(6 / len)`.
pub fn skewness_bound(len: usize, false_positive_rate: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(1.0 - false_positive_rate) * (6.0 / len as f64).sqrt()
}

/// Result of threshold selection.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdSelection {
    pub threshold: f64,
    /// Skewness bound the selection was tested against.
    pub bound: f64,
    /// Set when no candidate satisfied the bound and everything is suppressed.
    pub all_suppressed: bool,
}

/// Chooses the detection threshold by scanning the sorted unique output
/// values downward and keeping the first (fewest exclusions) at which the
/// sub-threshold skewness drops below the large-sample bound.
///
/// When samples had to be excluded, the returned threshold sits midway
/// between the last excluded value and the first kept one, so detections are
/// exactly the excluded samples. If no candidate satisfies the bound the
/// maximum is returned with `all_suppressed` set.
pub fn select_threshold(r: &[f64], false_positive_rate: f64) -> HosdResult<ThresholdSelection> {
    if !(0.0..0.5).contains(&false_positive_rate) || false_positive_rate == 0.0 {
        return Err(HosdError::InvalidInput(
            "false positive rate must lie in (0, 0.5)".into(),
        ));
    }
    if r.len() < 3 {
        return Err(HosdError::Degenerate(
            "need at least 3 samples to select a threshold".into(),
        ));
    }
    let bound = skewness_bound(r.len(), false_positive_rate);
    let mut unique: Vec<f64> = r.to_vec();
    unique.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    unique.dedup();
    let max = *unique.last().unwrap();

    // Descending over unique values; candidate k excludes the top k values.
    for (k, &candidate) in unique.iter().rev().enumerate() {
        match subthreshold_skewness(r, candidate) {
            Ok(gamma) if gamma < bound => {
                let threshold = if k == 0 {
                    max
                } else {
                    let next_larger = unique[unique.len() - k];
                    0.5 * (candidate + next_larger)
                };
                return Ok(ThresholdSelection {
                    threshold,
                    bound,
                    all_suppressed: false,
                });
            }
            Ok(_) => continue,
            // Too few samples or zero variance below this candidate: done.
            Err(_) => break,
        }
    }
    Ok(ThresholdSelection {
        threshold: max,
        bound,
        all_suppressed: true,
    })
}

/// Windows the filter output with a hard threshold and convolves the
/// estimated waveform with it: `w(t) = r(t) [r(t) > theta]` for odd orders,
/// with an absolute-value test (sign preserved) for even orders, and
/// `y = waveform (*) w` circularly.
pub fn reconstruct_component(
    waveform: &[f64],
    filter: &DelayFilter,
    x: &[f64],
    theta: f64,
    order: HosOrder,
) -> HosdResult<Vec<f64>> {
    let t = waveform.len();
    if x.len() != t {
        return Err(HosdError::DimensionMismatch {
            expected: t,
            actual: x.len(),
        });
    }
    let r = filter.apply(x)?;
    let windowed = threshold_window(&r, theta, order);
    Ok(circular_convolve(waveform, &windowed))
}

/// The hard-threshold window of a filter output.
pub fn threshold_window(r: &[f64], theta: f64, order: HosOrder) -> Vec<f64> {
    r.iter()
        .map(|&v| {
            let keep = if order.is_even() { v.abs() > theta } else { v > theta };
            if keep {
                v
            } else {
                0.0
            }
        })
        .collect()
}

/// Least-squares scalar fitting `y` to `x`: `<x, y> / <y, y>`, zero when `y`
/// vanishes. Concatenate records to fit one scale jointly.
pub fn fit_scale(x: &[f64], y: &[f64]) -> f64 {
    let dot_xy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let dot_yy: f64 = y.iter().map(|b| b * b).sum();
    if dot_yy == 0.0 {
        0.0
    } else {
        dot_xy / dot_yy
    }
}

fn circular_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let t = a.len();
    let fft = FftPair::new(t);
    let sa = fft.forward_real(a);
    let sb = fft.forward_real(b);
    let product: Vec<Complex64> = sa.iter().zip(sb.iter()).map(|(x, y)| x * y).collect();
    fft.inverse_real(&product)
}
