//! Thin wrappers around rustfft with the normalization conventions used
//! throughout the crate: forward transforms are unnormalized, inverse
//! transforms carry the 1/T factor.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// A forward/inverse FFT pair cached for one transform length.
pub struct FftPair {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized DFT of a real signal.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Unnormalized DFT of a complex signal, in place.
    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// Inverse DFT scaled by 1/T.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(spectrum.len(), self.len);
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }

    /// Real part of the normalized inverse DFT.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.inverse(spectrum).iter().map(|v| v.re).collect()
    }
}

/// Circular distance of a frequency bin from zero: `min(k, T - k)`.
pub fn circular_bin_distance(bin: usize, len: usize) -> usize {
    let k = bin % len;
    k.min(len - k)
}

/// Signed bins `-w ..= w` mapped to their circular indices in `0..len`.
///
/// With `cap = None` the full index range `0..len` is returned.
pub fn band_bins(len: usize, cap: Option<usize>) -> Vec<usize> {
    match cap {
        None => (0..len).collect(),
        Some(w) => {
            let w = w.min(len / 2);
            let mut bins: Vec<usize> = (-(w as i64)..=w as i64)
                .map(|s| s.rem_euclid(len as i64) as usize)
                .collect();
            bins.sort_unstable();
            bins.dedup();
            bins
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn round_trip_recovers_signal() {
        let fft = FftPair::new(16);
        let x: Vec<f64> = (0..16).map(|t| (t as f64 * 0.7).sin()).collect();
        let spec = fft.forward_real(&x);
        let back = fft.inverse_real(&spec);
        for (a, b) in x.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn band_bins_wrap_negative_frequencies() {
        assert_eq!(band_bins(8, Some(1)), vec![0, 1, 7]);
        assert_eq!(band_bins(8, Some(2)), vec![0, 1, 2, 6, 7]);
        assert_eq!(band_bins(8, None).len(), 8);
        // Cap larger than T/2 collapses to the full grid.
        assert_eq!(band_bins(8, Some(13)).len(), 8);
    }

    #[test]
    fn circular_distance_is_symmetric() {
        assert_eq!(circular_bin_distance(0, 8), 0);
        assert_eq!(circular_bin_distance(1, 8), 1);
        assert_eq!(circular_bin_distance(7, 8), 1);
        assert_eq!(circular_bin_distance(4, 8), 4);
    }
}
