//! FID recording, spectra, per-line phase readout, decay fits and the
//! closed-form signal models.

mod analytic;
mod fid;
mod fit;
mod phases;
mod spectrum;

pub use analytic::{analytic_fid, analytic_signal, analytic_signal_real_carrier, SignalKind, SignalModelParams};
pub use fid::{acquire_fid, Fid};
pub use fit::{fit_decay, fit_exponential, fit_stretched, DecayFit, DecayModel, ExpFit, StretchedFit, EXP_RESIDUAL_TOL, STRETCHED_SCORE};
pub use phases::{extract_peak_phases, raw_peak_phases, window_integrals, write_peaks_csv, PeakPhase};
pub use spectrum::{spectrum, PpmAxis, Spectrum};
