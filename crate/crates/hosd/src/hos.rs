//! Averaged higher-order spectra, bicoherence-style normalizations and the
//! HOS weighting filter.
//!
//! The third-order (bispectral) estimators operate on the full T x T circular
//! frequency grid; an optional bandwidth cap restricts both frequency
//! arguments to `|w| <= W` bins. Fourth-order (trispectral) estimators live in
//! [`crate::hos::trispectrum`] and always carry a cap.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{HosdError, HosdResult};
use crate::fft::band_bins;
use crate::spectra::SpectrumSet;

pub mod trispectrum;

/// HOS order used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HosOrder {
    /// Third order (bispectrum), sensitive to skewed features.
    #[default]
    Bispectrum,
    /// Fourth order (trispectrum), sign-blind, cubically more expensive.
    Trispectrum,
}

impl HosOrder {
    pub fn k(self) -> usize {
        match self {
            HosOrder::Bispectrum => 3,
            HosOrder::Trispectrum => 4,
        }
    }

    pub fn is_even(self) -> bool {
        self.k() % 2 == 0
    }
}

/// Denominator variant used to normalize the averaged HOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Power-spectral products, bounded bicoherence.
    Bicoherence,
    /// Squared average triple-product magnitude.
    MagnitudeWeighted,
    /// Magnitude weighting with the effective-degrees-of-freedom bias term.
    #[default]
    MagnitudeWeightedBiasCorrected,
}

/// Averaged bispectrum over the full circular frequency grid.
#[derive(Debug, Clone)]
pub struct BispectrumGrid {
    pub values: Array2<Complex64>,
    pub order: HosOrder,
    /// Number of records averaged.
    pub count: usize,
    /// Bandwidth cap the grid was estimated under, if any.
    pub cap: Option<usize>,
}

/// The HOS weighting filter H.
#[derive(Debug, Clone)]
pub struct HosFilter {
    pub(crate) grid: HosFilterGrid,
    pub normalization: Normalization,
    /// Half-width of the quasi-cumulant exclusion bands, in bins.
    pub quasi_cumulant_width: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum HosFilterGrid {
    Bispectral {
        values: Array2<Complex64>,
        cap: Option<usize>,
    },
    Trispectral(trispectrum::TrispectralFilterGrid),
}

impl HosFilter {
    pub fn order(&self) -> HosOrder {
        match &self.grid {
            HosFilterGrid::Bispectral { .. } => HosOrder::Bispectrum,
            HosFilterGrid::Trispectral(_) => HosOrder::Trispectrum,
        }
    }

    pub fn record_len(&self) -> usize {
        match &self.grid {
            HosFilterGrid::Bispectral { values, .. } => values.nrows(),
            HosFilterGrid::Trispectral(g) => g.record_len,
        }
    }

    /// The bispectral weight grid, if this is a third-order filter.
    pub fn bispectral_values(&self) -> Option<&Array2<Complex64>> {
        match &self.grid {
            HosFilterGrid::Bispectral { values, .. } => Some(values),
            HosFilterGrid::Trispectral(_) => None,
        }
    }

    /// Contracts one record spectrum against the filter, yielding the
    /// frequency-domain partial delay filter for that record.
    pub fn contract_record(&self, xj: &[Complex64]) -> HosdResult<Vec<Complex64>> {
        let t = self.record_len();
        if xj.len() != t {
            return Err(HosdError::DimensionMismatch {
                expected: t,
                actual: xj.len(),
            });
        }
        match &self.grid {
            HosFilterGrid::Bispectral { values, cap } => {
                let band = band_bins(t, *cap);
                let mut out = vec![Complex64::new(0.0, 0.0); t];
                for &w1 in &band {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &w2 in &band {
                        let h = values[(w1, w2)];
                        if h.re == 0.0 && h.im == 0.0 {
                            continue;
                        }
                        acc += xj[w2] * xj[(w1 + w2) % t].conj() * h;
                    }
                    out[w1] = acc;
                }
                Ok(out)
            }
            HosFilterGrid::Trispectral(g) => Ok(g.contract_record(xj)),
        }
    }
}

/// Direct averaged bispectrum: `B(w1,w2) = (1/L) sum_j X_j[w1] X_j[w2] X_j*[(w1+w2) mod T]`.
pub fn estimate_bispectrum(spectra: &SpectrumSet, cap: Option<usize>) -> HosdResult<BispectrumGrid> {
    let l = spectra.num_records();
    if l == 0 {
        return Err(HosdError::InvalidInput("no spectra to average".into()));
    }
    let t = spectra.record_len();
    let band = band_bins(t, cap);
    let mut values = Array2::<Complex64>::zeros((t, t));
    for j in 0..l {
        let x = spectra.record(j);
        for &w1 in &band {
            for &w2 in &band {
                values[(w1, w2)] += x[w1] * x[w2] * x[(w1 + w2) % t].conj();
            }
        }
    }
    let scale = 1.0 / l as f64;
    values.mapv_inplace(|v| v * scale);
    Ok(BispectrumGrid {
        values,
        order: HosOrder::Bispectrum,
        count: l,
        cap,
    })
}

/// Normalization denominator `D(w1,w2)`.
///
/// `Bicoherence` uses the power-product form
/// `(1/L^2) sum_i |X_i[w1]|^2 * sum_j |X_j[w2] X_j*[w1+w2]|^2`; the two
/// magnitude-weighted modes use the squared average triple-product magnitude.
pub fn estimate_denominator(
    spectra: &SpectrumSet,
    mode: Normalization,
    cap: Option<usize>,
) -> HosdResult<Array2<f64>> {
    let l = spectra.num_records();
    if l == 0 {
        return Err(HosdError::InvalidInput("no spectra to average".into()));
    }
    let t = spectra.record_len();
    let band = band_bins(t, cap);
    let mut d = Array2::<f64>::zeros((t, t));
    match mode {
        Normalization::Bicoherence => {
            let mut power = vec![0.0; t];
            for j in 0..l {
                for (w, v) in spectra.record(j).iter().enumerate() {
                    power[w] += v.norm_sqr();
                }
            }
            for &w1 in &band {
                for &w2 in &band {
                    let mut pair = 0.0;
                    for j in 0..l {
                        let x = spectra.record(j);
                        pair += (x[w2] * x[(w1 + w2) % t].conj()).norm_sqr();
                    }
                    d[(w1, w2)] = power[w1] * pair / (l * l) as f64;
                }
            }
        }
        Normalization::MagnitudeWeighted | Normalization::MagnitudeWeightedBiasCorrected => {
            for j in 0..l {
                let x = spectra.record(j);
                for &w1 in &band {
                    for &w2 in &band {
                        d[(w1, w2)] += (x[w1] * x[w2] * x[(w1 + w2) % t].conj()).norm();
                    }
                }
            }
            let scale = 1.0 / l as f64;
            d.mapv_inplace(|v| (v * scale) * (v * scale));
        }
    }
    Ok(d)
}

/// Small-sample bias of the magnitude-weighted average: the inverse root of
/// the effective degrees of freedom, `sqrt(sum w_j^2) / sum w_j`, with
/// `w_j = |X_j[w1] X_j[w2] X_j*[w1+w2]|`. Grid points where every weight is
/// zero get the maximal bias 1.
pub fn bias_epsilon(spectra: &SpectrumSet, cap: Option<usize>) -> HosdResult<Array2<f64>> {
    let l = spectra.num_records();
    if l == 0 {
        return Err(HosdError::InvalidInput("no spectra to average".into()));
    }
    let t = spectra.record_len();
    let band = band_bins(t, cap);
    let mut sum = Array2::<f64>::zeros((t, t));
    let mut sum_sq = Array2::<f64>::zeros((t, t));
    for j in 0..l {
        let x = spectra.record(j);
        for &w1 in &band {
            for &w2 in &band {
                let w = (x[w1] * x[w2] * x[(w1 + w2) % t].conj()).norm();
                sum[(w1, w2)] += w;
                sum_sq[(w1, w2)] += w * w;
            }
        }
    }
    let mut eps = Array2::<f64>::ones((t, t));
    for &w1 in &band {
        for &w2 in &band {
            let s = sum[(w1, w2)];
            if s > 0.0 {
                eps[(w1, w2)] = sum_sq[(w1, w2)].sqrt() / s;
            }
        }
    }
    Ok(eps)
}

/// Default denominator regularization: `1e-12 * max(D)`.
pub fn default_regularization(d: &Array2<f64>) -> f64 {
    1e-12 * d.iter().cloned().fold(0.0_f64, f64::max)
}

/// Builds the HOS weighting filter from an averaged bispectrum and its
/// denominator.
///
/// Without a bias grid, `H = B* / (D + reg)`. With one (magnitude-weighted
/// mode), `H = B*/sqrt(D+reg) * max(0, 1/sqrt(D+reg) - eps/|B|)`; the bracket
/// is clamped at zero so the correction can only shrink weights. The `w1 = 0`
/// row is always zeroed.
pub fn make_hos_filter(
    b: &BispectrumGrid,
    d: &Array2<f64>,
    eps: Option<&Array2<f64>>,
    reg: f64,
    mode: Normalization,
) -> HosdResult<HosFilter> {
    if b.values.dim() != d.dim() {
        return Err(HosdError::DimensionMismatch {
            expected: b.values.nrows(),
            actual: d.nrows(),
        });
    }
    if let Some(e) = eps {
        if e.dim() != d.dim() {
            return Err(HosdError::DimensionMismatch {
                expected: d.nrows(),
                actual: e.nrows(),
            });
        }
    }
    if reg < 0.0 || !reg.is_finite() {
        return Err(HosdError::InvalidInput(
            "regularization must be finite and non-negative".into(),
        ));
    }
    let t = b.values.nrows();
    let mut values = Array2::<Complex64>::zeros((t, t));
    for w1 in 0..t {
        for w2 in 0..t {
            let bv = b.values[(w1, w2)];
            let denom = d[(w1, w2)] + reg;
            if denom <= 0.0 {
                continue;
            }
            values[(w1, w2)] = match eps {
                None => bv.conj() / denom,
                Some(e) => {
                    let mag = bv.norm();
                    if mag == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        let sqrt_d = denom.sqrt();
                        let bracket = (1.0 / sqrt_d - e[(w1, w2)] / mag).max(0.0);
                        bv.conj() / sqrt_d * bracket
                    }
                }
            };
        }
    }
    for w2 in 0..t {
        values[(0, w2)] = Complex64::new(0.0, 0.0);
    }
    Ok(HosFilter {
        grid: HosFilterGrid::Bispectral { values, cap: b.cap },
        normalization: mode,
        quasi_cumulant_width: 0,
    })
}

/// Zeroes the filter wherever a partial sum of a strict subset of frequency
/// arguments lies within `delta_w` bins of zero. For the bispectrum this
/// removes the bands `|w1| <= delta_w`, `|w2| <= delta_w` and
/// `|w1 + w2| <= delta_w` (circular distances).
pub fn apply_quasi_cumulant_window(mut filter: HosFilter, delta_w: usize) -> HosFilter {
    match &mut filter.grid {
        HosFilterGrid::Bispectral { values, .. } => {
            let t = values.nrows();
            for w1 in 0..t {
                for w2 in 0..t {
                    if quasi_cumulant_excluded_k3(w1, w2, t, delta_w) {
                        values[(w1, w2)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
        HosFilterGrid::Trispectral(g) => g.apply_quasi_cumulant_window(delta_w),
    }
    filter.quasi_cumulant_width = delta_w;
    filter
}

/// True when `(w1, w2)` falls inside the K=3 quasi-cumulant exclusion bands.
pub fn quasi_cumulant_excluded_k3(w1: usize, w2: usize, t: usize, delta_w: usize) -> bool {
    let dist = |k: usize| crate::fft::circular_bin_distance(k, t);
    dist(w1) <= delta_w || dist(w2) <= delta_w || dist((w1 + w2) % t) <= delta_w
}

/// Configuration for the one-shot filter builder used by the pipeline.
#[derive(Debug, Clone)]
pub struct HosEstimationConfig {
    pub order: HosOrder,
    pub normalization: Normalization,
    pub quasi_cumulant_width: usize,
    pub bandwidth: Option<usize>,
}

impl Default for HosEstimationConfig {
    fn default() -> Self {
        HosEstimationConfig {
            order: HosOrder::Bispectrum,
            normalization: Normalization::MagnitudeWeightedBiasCorrected,
            quasi_cumulant_width: 1,
            bandwidth: None,
        }
    }
}

/// Estimates the HOS weighting filter from a set of record spectra: averaged
/// HOS, denominator, optional bias correction, regularization, DC exclusion
/// and quasi-cumulant windowing in one call.
pub fn estimate_hos_filter(spectra: &SpectrumSet, cfg: &HosEstimationConfig) -> HosdResult<HosFilter> {
    match cfg.order {
        HosOrder::Bispectrum => {
            let b = estimate_bispectrum(spectra, cfg.bandwidth)?;
            let d = estimate_denominator(spectra, cfg.normalization, cfg.bandwidth)?;
            let reg = default_regularization(&d);
            let eps = match cfg.normalization {
                Normalization::MagnitudeWeightedBiasCorrected => {
                    Some(bias_epsilon(spectra, cfg.bandwidth)?)
                }
                _ => None,
            };
            let filter = make_hos_filter(&b, &d, eps.as_ref(), reg, cfg.normalization)?;
            Ok(apply_quasi_cumulant_window(filter, cfg.quasi_cumulant_width))
        }
        HosOrder::Trispectrum => trispectrum::estimate_trispectral_filter(spectra, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{delay_circular, RecordEnsemble};
    use crate::spectra::fft_records;
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ensemble(l: usize, t: usize, seed: u64) -> RecordEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..t).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        RecordEnsemble::from_rows(&rows, 1.0).unwrap()
    }

    /// Brute-force triple-product bispectrum, the independent oracle.
    fn bispectrum_oracle(spectra: &SpectrumSet) -> Array2<Complex64> {
        let l = spectra.num_records();
        let t = spectra.record_len();
        let mut grid = Array2::<Complex64>::zeros((t, t));
        for w1 in 0..t {
            for w2 in 0..t {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..l {
                    let x = spectra.record(j);
                    acc += x[w1] * x[w2] * x[(w1 + w2) % t].conj();
                }
                grid[(w1, w2)] = acc / l as f64;
            }
        }
        grid
    }

    #[test]
    fn zero_ensemble_gives_zero_grid() {
        let e = RecordEnsemble::new(Array2::<f64>::zeros((3, 8)), 1.0).unwrap();
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        assert!(b.values.iter().all(|v| v.norm() == 0.0));
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_impulse_record_gives_unit_grid() {
        let mut records = Array2::<f64>::zeros((1, 8));
        records[(0, 0)] = 1.0;
        let e = RecordEnsemble::new(records, 1.0).unwrap();
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        for v in b.values.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        for &v in d.iter() {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_triple_product_oracle() {
        let e = random_ensemble(2, 8, 42);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let oracle = bispectrum_oracle(&s);
        for (a, o) in b.values.iter().zip(oracle.iter()) {
            let scale = o.norm().max(1e-300);
            assert!((a - o).norm() / scale < 1e-10);
        }
    }

    #[test]
    fn magnitude_denominator_dominates_bispectrum() {
        let e = random_ensemble(4, 16, 9);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        for (bv, &dv) in b.values.iter().zip(d.iter()) {
            assert!(bv.norm() <= dv.sqrt() + 1e-9);
        }
    }

    #[test]
    fn bicoherence_is_bounded_by_one() {
        let e = random_ensemble(6, 16, 13);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::Bicoherence, None).unwrap();
        for (bv, &dv) in b.values.iter().zip(d.iter()) {
            if dv > 0.0 {
                assert!(bv.norm() / dv.sqrt() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn epsilon_matches_hand_values() {
        // Equal weights across L = 4 records: eps = 1/2 everywhere.
        let mut records = Array2::<f64>::zeros((4, 8));
        for j in 0..4 {
            records[(j, 0)] = 1.0;
        }
        let e = RecordEnsemble::new(records, 1.0).unwrap();
        let s = fft_records(&e);
        let eps = bias_epsilon(&s, None).unwrap();
        for &v in eps.iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }

        // Single record: eps = 1 everywhere.
        let e1 = random_ensemble(1, 8, 5);
        let s1 = fft_records(&e1);
        let eps1 = bias_epsilon(&s1, None).unwrap();
        for &v in eps1.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_for_two_weights_three_four() {
        // Weights (3, 4): eps = sqrt(25/49) = 5/7.
        let w = [3.0_f64, 4.0];
        let eps = (w.iter().map(|v| v * v).sum::<f64>()).sqrt() / w.iter().sum::<f64>();
        assert!((eps - 5.0 / 7.0).abs() < 1e-15);
        // Cross-check the estimator path: two impulse records scaled 3 and 4
        // produce exactly those triple-product weights at every grid point.
        let mut records = Array2::<f64>::zeros((2, 8));
        records[(0, 0)] = 3.0_f64.cbrt();
        records[(1, 0)] = 4.0_f64.cbrt();
        let e = RecordEnsemble::new(records, 1.0).unwrap();
        let s = fft_records(&e);
        let grid = bias_epsilon(&s, None).unwrap();
        for &v in grid.iter() {
            assert!((v - 5.0 / 7.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_bispectrum_gives_zero_filter() {
        let e = RecordEnsemble::new(Array2::<f64>::zeros((2, 8)), 1.0).unwrap();
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        let h = make_hos_filter(&b, &d, None, 1e-12, Normalization::MagnitudeWeighted).unwrap();
        assert!(h.bispectral_values().unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn saturated_bias_clamps_filter_to_zero() {
        let e = random_ensemble(3, 8, 21);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        // eps >= |B|/sqrt(D) everywhere forces the bracket to clamp.
        let mut eps = Array2::<f64>::zeros(d.dim());
        for ((i, j), e_v) in eps.indexed_iter_mut() {
            let dv = d[(i, j)];
            *e_v = if dv > 0.0 {
                b.values[(i, j)].norm() / dv.sqrt() + 1.0
            } else {
                1.0
            };
        }
        let reg = default_regularization(&d);
        let h = make_hos_filter(
            &b,
            &d,
            Some(&eps),
            reg,
            Normalization::MagnitudeWeightedBiasCorrected,
        )
        .unwrap();
        assert!(h.bispectral_values().unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn dc_row_is_always_zero() {
        let e = random_ensemble(3, 16, 33);
        let s = fft_records(&e);
        let h = estimate_hos_filter(
            &s,
            &HosEstimationConfig {
                quasi_cumulant_width: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let values = h.bispectral_values().unwrap();
        for w2 in 0..16 {
            assert_eq!(values[(0, w2)], Complex64::new(0.0, 0.0));
        }
        assert!(values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn quasi_cumulant_window_matches_enumeration() {
        let t = 8usize;
        let e = random_ensemble(2, t, 3);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        let reg = default_regularization(&d);
        let h = make_hos_filter(&b, &d, None, reg, Normalization::MagnitudeWeighted).unwrap();
        let windowed = apply_quasi_cumulant_window(h, 1);
        let values = windowed.bispectral_values().unwrap();

        // Direct set enumeration of the expected exclusion region.
        let mut expected_zeroed = 0usize;
        let mut actual_zeroed = 0usize;
        for w1 in 0..t {
            for w2 in 0..t {
                let dist = |k: usize| k.min(t - k);
                let excluded = dist(w1) <= 1 || dist(w2) <= 1 || dist((w1 + w2) % t) <= 1;
                if excluded {
                    expected_zeroed += 1;
                    assert_eq!(values[(w1, w2)], Complex64::new(0.0, 0.0));
                }
                if values[(w1, w2)] == Complex64::new(0.0, 0.0) {
                    actual_zeroed += 1;
                }
            }
        }
        // Random data is nonzero off the excluded set, so the counts agree.
        assert_eq!(expected_zeroed, actual_zeroed);
    }

    #[test]
    fn window_with_zero_width_removes_only_exact_lines() {
        let t = 8usize;
        let e = random_ensemble(2, t, 17);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        let d = estimate_denominator(&s, Normalization::MagnitudeWeighted, None).unwrap();
        let reg = default_regularization(&d);
        let h = make_hos_filter(&b, &d, None, reg, Normalization::MagnitudeWeighted).unwrap();
        let windowed = apply_quasi_cumulant_window(h, 0);
        let values = windowed.bispectral_values().unwrap();
        for w1 in 0..t {
            for w2 in 0..t {
                let on_line = w1 == 0 || w2 == 0 || (w1 + w2) % t == 0;
                if on_line {
                    assert_eq!(values[(w1, w2)], Complex64::new(0.0, 0.0));
                } else {
                    assert!(values[(w1, w2)].norm() > 0.0);
                }
            }
        }
    }

    #[test]
    fn window_preserves_permutation_symmetry() {
        let e = random_ensemble(3, 16, 8);
        let s = fft_records(&e);
        let h = estimate_hos_filter(&s, &HosEstimationConfig::default()).unwrap();
        let values = h.bispectral_values().unwrap();
        for w1 in 1..16 {
            for w2 in 1..16 {
                let diff = (values[(w1, w2)] - values[(w2, w1)]).norm();
                assert!(diff < 1e-12 * values[(w1, w2)].norm().max(1.0));
            }
        }
    }

    #[test]
    fn bispectrum_is_shift_invariant_per_record() {
        let t = 32usize;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x: Vec<f64> = (0..t).map(|_| rng.random::<f64>() - 0.5).collect();
        for &shift in &[1usize, 7, 19] {
            let shifted = delay_circular(&x, shift);
            let e1 = RecordEnsemble::from_rows(&[x.clone()], 1.0).unwrap();
            let e2 = RecordEnsemble::from_rows(&[shifted], 1.0).unwrap();
            let b1 = estimate_bispectrum(&fft_records(&e1), None).unwrap();
            let b2 = estimate_bispectrum(&fft_records(&e2), None).unwrap();
            let max_diff = b1
                .values
                .iter()
                .zip(b2.values.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0_f64, f64::max);
            assert!(max_diff < 1e-10, "shift {shift}: max diff {max_diff}");
        }
    }

    #[test]
    fn grid_symmetries_hold() {
        let t = 16usize;
        let e = random_ensemble(3, t, 101);
        let s = fft_records(&e);
        let b = estimate_bispectrum(&s, None).unwrap();
        for w1 in 0..t {
            for w2 in 0..t {
                let perm = (b.values[(w1, w2)] - b.values[(w2, w1)]).norm();
                assert!(perm < 1e-12);
                let neg = (b.values[((t - w1) % t, (t - w2) % t)] - b.values[(w1, w2)].conj())
                    .norm();
                assert!(neg < 1e-12 * b.values[(w1, w2)].norm().max(1.0));
            }
        }
    }

    #[test]
    fn capped_grid_matches_full_grid_inside_band() {
        let t = 16usize;
        let e = random_ensemble(2, t, 55);
        let s = fft_records(&e);
        let full = estimate_bispectrum(&s, None).unwrap();
        let capped = estimate_bispectrum(&s, Some(3)).unwrap();
        let band = band_bins(t, Some(3));
        for &w1 in &band {
            for &w2 in &band {
                assert!((full.values[(w1, w2)] - capped.values[(w1, w2)]).norm() < 1e-12);
            }
        }
        // Outside the band the capped grid is zero.
        assert_eq!(capped.values[(5, 5)], Complex64::new(0.0, 0.0));
    }
}
