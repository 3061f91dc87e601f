//! Higher-order spectral decomposition (HOSD) of record ensembles.
//!
//! This crate recovers unknown recurring transient waveforms from ensembles of
//! noisy records without prior knowledge of the waveform. The detection filter
//! is built from bicoherence-weighted higher-order spectra, records are brought
//! into alignment by iterated realignment, and additive components are peeled
//! off by deflation. A streaming variant maintains running-average estimates
//! for real-time detection, and second-order baselines (pairwise
//! cross-correlation with SVD phase recovery, Woody's algorithm) are included
//! for benchmarking.
//!
//! The main entry points are:
//!
//! * [`synthesis::make_transient`] / [`synthesis::embed_ensemble`] to build
//!   seeded test ensembles,
//! * [`delay::iterate_alignment`] to estimate per-record delays,
//! * [`decomposition::hosd_decompose`] for the full deflation loop,
//! * [`streaming::StreamState`] for record-by-record online estimation.

pub mod baselines;
pub mod decomposition;
pub mod delay;
pub mod ensemble;
mod error;
pub mod fft;
pub mod hos;
pub mod reconstruction;
pub mod spectra;
pub mod streaming;
pub mod synthesis;

pub use ensemble::{RecordEnsemble, Taper};
pub use error::{HosdError, HosdResult};
pub use hos::{HosOrder, Normalization};
