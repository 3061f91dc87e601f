//! Synthetic test signals: band-limited transients embedded at random
//! circular delays in band-split Gaussian or chi-square noise, plus the
//! circular statistics used to score delay recovery.
//!
//! Everything is driven by a pinned portable generator (ChaCha8) so seeded
//! runs reproduce bit-for-bit across machines.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensemble::{delay_circular, RecordEnsemble};
use crate::error::{HosdError, HosdResult};
use crate::fft::FftPair;

const SALT_TRANSIENT: u64 = 0x7472_616e_7369;
const SALT_EMBED: u64 = 0x656d_6265_64;
const SALT_CHI2: u64 = 0x6368_6932;

/// Noise family added to the embedded records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Squared Gaussian white noise (chi-square, skewed) filtered into band.
    Chi2Filtered,
}

/// How the out-band noise occupies the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutbandMode {
    /// Complement of the passband, low-pass filtered below the passband's
    /// upper edge (the arrangement used by the reference benchmark figures).
    #[default]
    LowpassLiteral,
    /// Full spectral complement of the passband.
    Complement,
}

/// Parameters of a synthetic ensemble.
#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub record_len: usize,
    pub num_records: usize,
    /// Passband in normalized frequency, `0 < low < high <= 0.5`.
    pub passband: (f64, f64),
    /// Standard width of the Gaussian time window, in samples.
    pub gauss_window_std: f64,
    /// Ratio of total signal energy to in-band noise energy, dB. `INFINITY`
    /// disables the band.
    pub inband_snr_db: f64,
    pub outband_snr_db: f64,
    pub noise_kind: NoiseKind,
    pub outband_mode: OutbandMode,
    pub seed: u64,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        SynthesisSpec {
            record_len: 512,
            num_records: 64,
            passband: (0.01, 0.1),
            gauss_window_std: 20.0,
            inband_snr_db: 9.5,
            outband_snr_db: f64::INFINITY,
            noise_kind: NoiseKind::Gaussian,
            outband_mode: OutbandMode::LowpassLiteral,
            seed: 0,
        }
    }
}

impl SynthesisSpec {
    pub fn validate(&self) -> HosdResult<()> {
        let (low, high) = self.passband;
        if !(low > 0.0 && low < high && high <= 0.5) {
            return Err(HosdError::InvalidInput(format!(
                "passband ({low}, {high}) must satisfy 0 < low < high <= 0.5"
            )));
        }
        if self.record_len < crate::ensemble::MIN_RECORD_LEN {
            return Err(HosdError::InvalidInput("record length too short".into()));
        }
        if self.num_records == 0 {
            return Err(HosdError::InvalidInput("need at least one record".into()));
        }
        if self.gauss_window_std <= 0.0 {
            return Err(HosdError::InvalidInput("window std must be positive".into()));
        }
        for db in [self.inband_snr_db, self.outband_snr_db] {
            if db.is_nan() || db == f64::NEG_INFINITY {
                return Err(HosdError::InvalidInput("SNR must be finite or +inf".into()));
            }
        }
        if band_mask(self.record_len, low, high).iter().all(|&b| !b) {
            return Err(HosdError::InvalidInput(
                "passband contains no frequency bins at this record length".into(),
            ));
        }
        Ok(())
    }
}

/// What actually went into a synthetic ensemble.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub waveform: Vec<f64>,
    pub true_delays: Vec<usize>,
    pub noise_realization_seed: u64,
    /// Achieved per-record noise-to-signal energy ratios (1.0 at 0 dB).
    pub inband_energy_ratio: Vec<f64>,
    pub outband_energy_ratio: Vec<f64>,
}

/// Mask of bins whose normalized frequency `min(k, T-k)/T` lies in
/// `[low, high]`.
pub fn band_mask(t: usize, low: f64, high: f64) -> Vec<bool> {
    (0..t)
        .map(|k| {
            let f = k.min(t - k) as f64 / t as f64;
            f >= low && f <= high
        })
        .collect()
}

/// Mask of bins at or below `high` in normalized frequency (DC included).
pub fn lowpass_mask(t: usize, high: f64) -> Vec<bool> {
    (0..t)
        .map(|k| (k.min(t - k) as f64 / t as f64) <= high)
        .collect()
}

fn apply_mask(x: &[f64], mask: &[bool]) -> Vec<f64> {
    let fft = FftPair::new(x.len());
    let mut spec = fft.forward_real(x);
    for (v, &keep) in spec.iter_mut().zip(mask.iter()) {
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft.inverse_real(&spec)
}

/// The test transient: Gaussian white noise under a Gaussian time window,
/// brick-wall bandpassed, then normalized to zero mean and unit variance.
pub fn make_transient(spec: &SynthesisSpec) -> HosdResult<Vec<f64>> {
    spec.validate()?;
    let t = spec.record_len;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ SALT_TRANSIENT);
    let center = t as f64 / 2.0;
    let two_var = 2.0 * spec.gauss_window_std * spec.gauss_window_std;
    let windowed: Vec<f64> = (0..t)
        .map(|i| {
            let g: f64 = rng.sample(StandardNormal);
            let d = i as f64 - center;
            g * (-d * d / two_var).exp()
        })
        .collect();
    let mask = band_mask(t, spec.passband.0, spec.passband.1);
    let mut x = apply_mask(&windowed, &mask);
    let mean = x.iter().sum::<f64>() / t as f64;
    for v in &mut x {
        *v -= mean;
    }
    let var = x.iter().map(|v| v * v).sum::<f64>() / t as f64;
    if var <= 0.0 {
        return Err(HosdError::Degenerate("transient has zero energy".into()));
    }
    let std = var.sqrt();
    for v in &mut x {
        *v /= std;
    }
    Ok(x)
}

/// Splits one white-noise draw into in-band and out-band parts. The two parts
/// come from the same draw with complementary filters, so in the literal mode
/// their sum reproduces the low-passed input exactly.
pub fn band_split(
    white: &[f64],
    passband: (f64, f64),
    mode: OutbandMode,
) -> (Vec<f64>, Vec<f64>) {
    let t = white.len();
    let inband = apply_mask(white, &band_mask(t, passband.0, passband.1));
    let outband = match mode {
        OutbandMode::LowpassLiteral => {
            let lowpassed = apply_mask(white, &lowpass_mask(t, passband.1));
            lowpassed
                .iter()
                .zip(inband.iter())
                .map(|(a, b)| a - b)
                .collect()
        }
        OutbandMode::Complement => white
            .iter()
            .zip(inband.iter())
            .map(|(a, b)| a - b)
            .collect(),
    };
    (inband, outband)
}

fn snr_db_to_energy(signal_energy: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_energy * 10f64.powf(-snr_db / 10.0)
    }
}

fn scale_to_energy(noise: &mut [f64], target: f64) -> f64 {
    let energy: f64 = noise.iter().map(|v| v * v).sum();
    if energy <= 0.0 || target <= 0.0 {
        for v in noise.iter_mut() {
            *v = 0.0;
        }
        return 0.0;
    }
    let c = (target / energy).sqrt();
    for v in noise.iter_mut() {
        *v *= c;
    }
    target
}

/// Embeds circularly shifted copies of `waveform` in band-split noise, one
/// uniform shift per record, with each band scaled per record so its energy
/// hits the requested ratio against the waveform energy exactly.
pub fn embed_ensemble(
    waveform: &[f64],
    spec: &SynthesisSpec,
) -> HosdResult<(RecordEnsemble, GroundTruth)> {
    spec.validate()?;
    let t = spec.record_len;
    if waveform.len() != t {
        return Err(HosdError::DimensionMismatch {
            expected: t,
            actual: waveform.len(),
        });
    }
    let signal_energy: f64 = waveform.iter().map(|v| v * v).sum();
    let inband_target = snr_db_to_energy(signal_energy, spec.inband_snr_db);
    let outband_target = snr_db_to_energy(signal_energy, spec.outband_snr_db);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ SALT_EMBED);
    let mut rows = Vec::with_capacity(spec.num_records);
    let mut delays = Vec::with_capacity(spec.num_records);
    let mut in_ratios = Vec::with_capacity(spec.num_records);
    let mut out_ratios = Vec::with_capacity(spec.num_records);

    for j in 0..spec.num_records {
        let shift = rng.random_range(0..t);
        delays.push(shift);
        let mut record = delay_circular(waveform, shift);

        let (mut inband, mut outband) = match spec.noise_kind {
            NoiseKind::Gaussian => {
                let white: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
                band_split(&white, spec.passband, spec.outband_mode)
            }
            NoiseKind::Chi2Filtered => {
                let in_amp: Vec<f64> = band_mask(t, spec.passband.0, spec.passband.1)
                    .iter()
                    .map(|&b| if b { 1.0 } else { 0.0 })
                    .collect();
                let out_amp: Vec<f64> = match spec.outband_mode {
                    OutbandMode::LowpassLiteral => lowpass_mask(t, spec.passband.1)
                        .iter()
                        .zip(in_amp.iter())
                        .map(|(&lp, &ib)| if lp && ib == 0.0 { 1.0 } else { 0.0 })
                        .collect(),
                    OutbandMode::Complement => in_amp.iter().map(|&v| 1.0 - v).collect(),
                };
                let seed_in = spec.seed ^ SALT_CHI2 ^ (2 * j as u64 + 1);
                let seed_out = spec.seed ^ SALT_CHI2 ^ (2 * j as u64 + 2);
                (
                    nongaussian_noise(&in_amp, seed_in)?,
                    nongaussian_noise(&out_amp, seed_out)?,
                )
            }
        };
        let achieved_in = scale_to_energy(&mut inband, inband_target);
        let achieved_out = scale_to_energy(&mut outband, outband_target);
        in_ratios.push(achieved_in / signal_energy);
        out_ratios.push(achieved_out / signal_energy);

        for ((r, a), b) in record.iter_mut().zip(inband.iter()).zip(outband.iter()) {
            *r += a + b;
        }
        rows.push(record);
    }

    let ensemble = RecordEnsemble::from_rows(&rows, 1.0)?;
    Ok((
        ensemble,
        GroundTruth {
            waveform: waveform.to_vec(),
            true_delays: delays,
            noise_realization_seed: spec.seed,
            inband_energy_ratio: in_ratios,
            outband_energy_ratio: out_ratios,
        },
    ))
}

/// Chi-square(1) white noise (squared standard normal, mean removed) shaped
/// by `amplitude_spectrum` with a randomized phase response, smoothed over
/// T/32 bins so the filter keeps a compact time envelope.
pub fn nongaussian_noise(amplitude_spectrum: &[f64], seed: u64) -> HosdResult<Vec<f64>> {
    let t = amplitude_spectrum.len();
    if t < crate::ensemble::MIN_RECORD_LEN {
        return Err(HosdError::InvalidInput("amplitude spectrum too short".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..t)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * g - 1.0
        })
        .collect();

    let phases = smoothed_random_phases(t, &mut rng);
    let fft = FftPair::new(t);
    let mut spec = fft.forward_real(&white);
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= amplitude_spectrum[k] * Complex64::from_polar(1.0, phases[k]);
    }
    Ok(fft.inverse_real(&spec))
}

/// Hermitian-symmetric random phase response, moving-average smoothed.
fn smoothed_random_phases(t: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let half = t / 2;
    let raw: Vec<f64> = (0..half)
        .map(|_| (rng.random::<f64>() - 0.5) * std::f64::consts::TAU)
        .collect();
    let width = (t / 32).max(1);
    let mut phases = vec![0.0; t];
    for k in 1..half {
        let lo = k.saturating_sub(width).max(1);
        let hi = (k + width).min(half - 1);
        let mean = raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        phases[k] = mean;
        phases[t - k] = -mean;
    }
    phases
}

/// Circular correlation coefficient between two integer delay vectors mapped
/// to angles `2 pi tau / T`; invariant to a common offset in either argument.
pub fn circular_delay_correlation(
    true_delays: &[usize],
    estimated: &[usize],
    record_len: usize,
) -> HosdResult<f64> {
    if true_delays.len() != estimated.len() {
        return Err(HosdError::DimensionMismatch {
            expected: true_delays.len(),
            actual: estimated.len(),
        });
    }
    if true_delays.len() < 3 {
        return Err(HosdError::Degenerate(
            "circular correlation needs at least 3 records".into(),
        ));
    }
    let to_angles = |lags: &[usize]| -> Vec<f64> {
        lags.iter()
            .map(|&v| std::f64::consts::TAU * v as f64 / record_len as f64)
            .collect()
    };
    let a = to_angles(true_delays);
    let b = to_angles(estimated);
    let mean_angle = |xs: &[f64]| -> f64 {
        let s: f64 = xs.iter().map(|v| v.sin()).sum();
        let c: f64 = xs.iter().map(|v| v.cos()).sum();
        s.atan2(c)
    };
    let am = mean_angle(&a);
    let bm = mean_angle(&b);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let sx = (x - am).sin();
        let sy = (y - bm).sin();
        num += sx * sy;
        da += sx * sx;
        db += sy * sy;
    }
    if da <= 0.0 || db <= 0.0 {
        return Err(HosdError::Degenerate(
            "delays have no circular dispersion".into(),
        ));
    }
    Ok(num / (da * db).sqrt())
}

/// Maximum Pearson correlation between `a` and circular shifts of `b`,
/// with the maximizing shift. Used to score recovered waveforms, which are
/// only defined up to a common circular offset.
pub fn best_circular_correlation(a: &[f64], b: &[f64]) -> HosdResult<(f64, usize)> {
    if a.len() != b.len() {
        return Err(HosdError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let t = a.len();
    let center = |x: &[f64]| -> Vec<f64> {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - m).collect()
    };
    let ac = center(a);
    let bc = center(b);
    let na: f64 = ac.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = bc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(HosdError::Degenerate("constant input has no correlation".into()));
    }
    let fft = FftPair::new(t);
    let sa = fft.forward_real(&ac);
    let sb = fft.forward_real(&bc);
    let product: Vec<Complex64> = sa.iter().zip(sb.iter()).map(|(x, y)| x * y.conj()).collect();
    let xcorr = fft.inverse_real(&product);
    let mut best = f64::NEG_INFINITY;
    let mut best_shift = 0usize;
    for (s, &v) in xcorr.iter().enumerate() {
        let corr = v / (na * nb);
        if corr > best {
            best = corr;
            best_shift = s;
        }
    }
    Ok((best, best_shift))
}
