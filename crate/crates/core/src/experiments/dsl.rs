use std::fs;
use std::path::{Path, PathBuf};

use super::plot::{Plot, Series, Style};
use super::{center_side_coupling, create, line_centers, windowed_real, ExperimentConfig};
use crate::acquisition::{extract_peak_phases, spectrum, write_peaks_csv, PeakPhase, PpmAxis, Spectrum};
use crate::pulseprog::{parse, PulseProgram};
use crate::sim::{run_program, RunOutput, OBSERVED};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DslReport {
    pub program: PulseProgram,
    pub output: RunOutput,
    pub spectrum: Option<Spectrum>,
    /// Center-spin lines; empty when the spectrum cannot resolve them.
    pub peaks: Vec<PeakPhase>,
    pub files: Vec<PathBuf>,
}

/// Parses and runs a program file. Outputs are named after the file stem.
pub fn run_dsl(path: &Path, cfg: &ExperimentConfig) -> Result<DslReport> {
    let source = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("program");
    run_dsl_source(&source, stem, cfg)
}

/// Parses and runs program text; parse failures come back as
/// [`Error::Parse`] carrying every diagnostic.
pub fn run_dsl_source(source: &str, stem: &str, cfg: &ExperimentConfig) -> Result<DslReport> {
    let program = parse(source).map_err(Error::Parse)?;
    cfg.validate()?;
    let dir = cfg.prepare_output()?;
    let molecule = cfg.molecule()?;
    let sim = cfg.sim_config(&molecule)?;
    let output = run_program(&program, &sim, &cfg.initial_state()?)?;

    let mut files = Vec::new();
    let mut spec_out = None;
    let mut peaks = Vec::new();
    if let Some(fid) = &output.fid {
        fid.write_csv(create(&dir, &format!("{stem}_fid.csv"), &mut files)?)?;
        let omega0 = cfg.receiver_offset();
        let axis = PpmAxis::for_receiver(&molecule, OBSERVED, omega0)?;
        let spec = spectrum(fid, cfg.zero_fill)?.with_ppm_axis(axis);
        spec.write_csv(create(&dir, &format!("{stem}_spectrum.csv"), &mut files)?)?;
        let mut plot = Plot::new(format!("{stem}: spectrum"), "shift (ppm)", "Re S (a.u.)").reversed_x();
        if let Ok(j) = center_side_coupling(&output.register) {
            match extract_peak_phases(&spec, &line_centers(omega0, j), j / 4.0) {
                Ok(p) => {
                    write_peaks_csv(create(&dir, &format!("{stem}_peaks.csv"), &mut files)?, &p, |w| axis.ppm(w))?;
                    peaks = p;
                }
                Err(e) => log::warn!("no line phases for {stem}: {e}"),
            }
            let (x, y) = windowed_real(&spec, &axis, omega0 - 2.0 * j, omega0 + 2.0 * j);
            plot.push(Series::new("re", x, y, Style::Line));
        } else {
            let (x, y): (Vec<f64>, Vec<f64>) = spec.freqs().iter().zip(spec.bins()).map(|(f, b)| (axis.ppm(*f), b.re)).unzip();
            plot.push(Series::new("re", x, y, Style::Line));
        }
        files.extend(plot.write(&dir, &format!("{stem}_spectrum"))?);
        spec_out = Some(spec);
    }
    Ok(DslReport { program, output, spectrum: spec_out, peaks, files })
}
