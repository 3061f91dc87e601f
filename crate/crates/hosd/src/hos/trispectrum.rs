//! Fourth-order (trispectral) estimators.
//!
//! The trispectrum is stored over signed bins `-W ..= W` in all three
//! frequency arguments; the cap is mandatory because storage and contraction
//! grow cubically. Indexing maps signed bin `s` to `s + W`.

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{HosdError, HosdResult};
use crate::fft::circular_bin_distance;
use crate::spectra::SpectrumSet;

use super::{HosEstimationConfig, HosFilter, HosFilterGrid, Normalization};

/// Default bandwidth cap for trispectral grids, in bins.
pub const DEFAULT_TRISPECTRUM_CAP: usize = 64;

/// Averaged trispectrum over the capped signed-bin cube.
#[derive(Debug, Clone)]
pub struct TrispectrumGrid {
    pub values: Array3<Complex64>,
    pub count: usize,
    pub cap: usize,
    pub record_len: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TrispectralFilterGrid {
    pub values: Array3<Complex64>,
    pub cap: usize,
    pub record_len: usize,
}

fn effective_cap(record_len: usize, requested: Option<usize>) -> usize {
    requested.unwrap_or(DEFAULT_TRISPECTRUM_CAP).min(record_len / 2)
}

fn signed_to_bin(s: i64, t: usize) -> usize {
    s.rem_euclid(t as i64) as usize
}

/// Direct averaged trispectrum:
/// `M4(w1,w2,w3) = (1/L) sum_j X_j[w1] X_j[w2] X_j[w3] X_j*[(w1+w2+w3) mod T]`.
pub fn estimate_trispectrum(spectra: &SpectrumSet, cap: Option<usize>) -> HosdResult<TrispectrumGrid> {
    let l = spectra.num_records();
    if l == 0 {
        return Err(HosdError::InvalidInput("no spectra to average".into()));
    }
    let t = spectra.record_len();
    let w = effective_cap(t, cap);
    let n = 2 * w + 1;
    let mut values = Array3::<Complex64>::zeros((n, n, n));
    for j in 0..l {
        let x = spectra.record(j);
        for s1 in -(w as i64)..=w as i64 {
            let b1 = signed_to_bin(s1, t);
            for s2 in -(w as i64)..=w as i64 {
                let b2 = signed_to_bin(s2, t);
                let x12 = x[b1] * x[b2];
                for s3 in -(w as i64)..=w as i64 {
                    let b3 = signed_to_bin(s3, t);
                    let bsum = signed_to_bin(s1 + s2 + s3, t);
                    values[(
                        (s1 + w as i64) as usize,
                        (s2 + w as i64) as usize,
                        (s3 + w as i64) as usize,
                    )] += x12 * x[b3] * x[bsum].conj();
                }
            }
        }
    }
    let scale = 1.0 / l as f64;
    values.mapv_inplace(|v| v * scale);
    Ok(TrispectrumGrid {
        values,
        count: l,
        cap: w,
        record_len: t,
    })
}

/// One pass over the ensemble accumulating everything the filter needs.
struct TrispectrumAccumulators {
    b: Array3<Complex64>,
    weight_sum: Array3<f64>,
    weight_sq_sum: Array3<f64>,
    pair_power: Array3<f64>,
    power: Vec<f64>,
}

fn accumulate(spectra: &SpectrumSet, w: usize) -> TrispectrumAccumulators {
    let t = spectra.record_len();
    let n = 2 * w + 1;
    let mut acc = TrispectrumAccumulators {
        b: Array3::zeros((n, n, n)),
        weight_sum: Array3::zeros((n, n, n)),
        weight_sq_sum: Array3::zeros((n, n, n)),
        pair_power: Array3::zeros((n, n, n)),
        power: vec![0.0; t],
    };
    for j in 0..spectra.num_records() {
        let x = spectra.record(j);
        for (bin, v) in x.iter().enumerate() {
            acc.power[bin] += v.norm_sqr();
        }
        for s1 in -(w as i64)..=w as i64 {
            let b1 = signed_to_bin(s1, t);
            let i1 = (s1 + w as i64) as usize;
            for s2 in -(w as i64)..=w as i64 {
                let b2 = signed_to_bin(s2, t);
                let i2 = (s2 + w as i64) as usize;
                for s3 in -(w as i64)..=w as i64 {
                    let b3 = signed_to_bin(s3, t);
                    let i3 = (s3 + w as i64) as usize;
                    let bsum = signed_to_bin(s1 + s2 + s3, t);
                    let tail = x[b2] * x[b3] * x[bsum].conj();
                    let quad = x[b1] * tail;
                    let mag = quad.norm();
                    acc.b[(i1, i2, i3)] += quad;
                    acc.weight_sum[(i1, i2, i3)] += mag;
                    acc.weight_sq_sum[(i1, i2, i3)] += mag * mag;
                    acc.pair_power[(i1, i2, i3)] += tail.norm_sqr();
                }
            }
        }
    }
    acc
}

/// Builds the fourth-order weighting filter; the trispectral analogue of
/// [`super::estimate_hos_filter`].
pub(crate) fn estimate_trispectral_filter(
    spectra: &SpectrumSet,
    cfg: &HosEstimationConfig,
) -> HosdResult<HosFilter> {
    let l = spectra.num_records();
    if l == 0 {
        return Err(HosdError::InvalidInput("no spectra to average".into()));
    }
    let t = spectra.record_len();
    let w = effective_cap(t, cfg.bandwidth);
    let n = 2 * w + 1;
    let acc = accumulate(spectra, w);
    let lf = l as f64;

    let mut d = Array3::<f64>::zeros((n, n, n));
    match cfg.normalization {
        Normalization::Bicoherence => {
            for i1 in 0..n {
                let b1 = signed_to_bin(i1 as i64 - w as i64, t);
                for i2 in 0..n {
                    for i3 in 0..n {
                        d[(i1, i2, i3)] = acc.power[b1] * acc.pair_power[(i1, i2, i3)] / (lf * lf);
                    }
                }
            }
        }
        Normalization::MagnitudeWeighted | Normalization::MagnitudeWeightedBiasCorrected => {
            for (dst, &s) in d.iter_mut().zip(acc.weight_sum.iter()) {
                let mean = s / lf;
                *dst = mean * mean;
            }
        }
    }
    let reg = 1e-12 * d.iter().cloned().fold(0.0_f64, f64::max);

    let mut values = Array3::<Complex64>::zeros((n, n, n));
    let corrected = cfg.normalization == Normalization::MagnitudeWeightedBiasCorrected;
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                let bv = acc.b[(i1, i2, i3)] / lf;
                let denom = d[(i1, i2, i3)] + reg;
                if denom <= 0.0 {
                    continue;
                }
                values[(i1, i2, i3)] = if corrected {
                    let mag = bv.norm();
                    if mag == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        let ws = acc.weight_sum[(i1, i2, i3)];
                        let eps = if ws > 0.0 {
                            acc.weight_sq_sum[(i1, i2, i3)].sqrt() / ws
                        } else {
                            1.0
                        };
                        let sqrt_d = denom.sqrt();
                        let bracket = (1.0 / sqrt_d - eps / mag).max(0.0);
                        bv.conj() / sqrt_d * bracket
                    }
                } else {
                    bv.conj() / denom
                };
            }
        }
    }
    // DC exclusion on the first argument.
    for i2 in 0..n {
        for i3 in 0..n {
            values[(w, i2, i3)] = Complex64::new(0.0, 0.0);
        }
    }
    let mut grid = TrispectralFilterGrid {
        values,
        cap: w,
        record_len: t,
    };
    grid.apply_quasi_cumulant_window(cfg.quasi_cumulant_width);
    Ok(HosFilter {
        grid: HosFilterGrid::Trispectral(grid),
        normalization: cfg.normalization,
        quasi_cumulant_width: cfg.quasi_cumulant_width,
    })
}

impl TrispectralFilterGrid {
    /// Zeroes entries where any strict-subset partial sum of the four
    /// frequency arguments lies within `delta_w` bins of zero.
    pub(crate) fn apply_quasi_cumulant_window(&mut self, delta_w: usize) {
        let w = self.cap as i64;
        let t = self.record_len;
        for s1 in -w..=w {
            for s2 in -w..=w {
                for s3 in -w..=w {
                    if quasi_cumulant_excluded_k4(s1, s2, s3, t, delta_w) {
                        self.values[(
                            (s1 + w) as usize,
                            (s2 + w) as usize,
                            (s3 + w) as usize,
                        )] = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
    }

    pub(crate) fn contract_record(&self, xj: &[Complex64]) -> Vec<Complex64> {
        let t = self.record_len;
        let w = self.cap as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); t];
        for s1 in -w..=w {
            let i1 = (s1 + w) as usize;
            let b1 = signed_to_bin(s1, t);
            let mut sum = Complex64::new(0.0, 0.0);
            for s2 in -w..=w {
                let i2 = (s2 + w) as usize;
                let b2 = signed_to_bin(s2, t);
                for s3 in -w..=w {
                    let h = self.values[(i1, i2, (s3 + w) as usize)];
                    if h.re == 0.0 && h.im == 0.0 {
                        continue;
                    }
                    let b3 = signed_to_bin(s3, t);
                    let bsum = signed_to_bin(s1 + s2 + s3, t);
                    sum += xj[b2] * xj[b3] * xj[bsum].conj() * h;
                }
            }
            out[b1] = sum;
        }
        out
    }
}

/// True when `(w1, w2, w3)` falls inside the K=4 quasi-cumulant exclusion
/// region: any of the single arguments, pair sums or the triple sum within
/// `delta_w` bins of zero (the implicit fourth argument mirrors these).
pub fn quasi_cumulant_excluded_k4(s1: i64, s2: i64, s3: i64, t: usize, delta_w: usize) -> bool {
    let dist = |s: i64| circular_bin_distance(s.rem_euclid(t as i64) as usize, t);
    dist(s1) <= delta_w
        || dist(s2) <= delta_w
        || dist(s3) <= delta_w
        || dist(s1 + s2) <= delta_w
        || dist(s1 + s3) <= delta_w
        || dist(s2 + s3) <= delta_w
        || dist(s1 + s2 + s3) <= delta_w
}
