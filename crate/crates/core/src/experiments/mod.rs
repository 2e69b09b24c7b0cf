//! The reproducible experiment families and their file outputs.
//!
//! Each runner takes an [`ExperimentConfig`], writes CSV tables and SVG
//! plots (each with a `.plot.csv` sidecar) into the configured output
//! directory and returns the numbers it wrote. Runs are deterministic:
//! identical configs give byte-identical files.

mod config;
mod dsl;
mod fid_appendix;
mod noise_decay;
mod phase_sweep;
pub mod plot;
mod theory;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use dsl::{run_dsl, run_dsl_source, DslReport};
pub use fid_appendix::{run_fid_appendix, FidAppendixReport, FidRun};
pub use noise_decay::{run_noise_decay, CurveReport, DecayCurve, DecayPoint, NoiseDecayReport};
pub use phase_sweep::{run_phase_sweep, PhaseRow, PhaseSweepReport};
pub use theory::{run_spectrum_theory, SpectrumTheoryReport, TheoryPanel};

use crate::acquisition::{PpmAxis, Spectrum};
use crate::spin::SpinSystem;
use crate::Result;

/// Names of the three center-spin lines, in `(ω0 + J, ω0, ω0 − J)` order.
pub const LINE_NAMES: [&str; 3] = ["left", "center", "right"];

/// Expected centers of the three center-spin lines.
pub fn line_centers(omega0: f64, j: f64) -> [f64; 3] {
    [omega0 + j, omega0, omega0 - j]
}

pub(crate) fn center_side_coupling(molecule: &SpinSystem) -> Result<f64> {
    molecule.coupling_between("CC", "CS1")
}

/// Filename-safe rendering of an angle.
pub(crate) fn angle_tag(deg: f64) -> String {
    format!("{deg}").replace('-', "m").replace('.', "p")
}

/// Wraps degrees to (−180, 180].
pub(crate) fn wrap_deg(d: f64) -> f64 {
    let w = d.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

pub(crate) fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

/// `(ppm, re)` of the bins within `[lo, hi]` rad/s.
pub(crate) fn windowed_real(spec: &Spectrum, axis: &PpmAxis, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    spec.freqs()
        .iter()
        .zip(spec.bins())
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(f, b)| (axis.ppm(*f), b.re))
        .unzip()
}
