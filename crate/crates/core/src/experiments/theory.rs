use std::io::Write;
use std::path::PathBuf;

use super::plot::{Plot, Series, Style};
use super::{angle_tag, center_side_coupling, create, line_centers, windowed_real, ExperimentConfig};
use crate::acquisition::{analytic_fid, extract_peak_phases, spectrum, write_peaks_csv, PeakPhase, PpmAxis, SignalKind, SignalModelParams, Spectrum};
use crate::sim::OBSERVED;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryPanel {
    pub kind: SignalKind,
    pub theta_deg: f64,
    pub spectrum: Spectrum,
    /// Lines in `(ω0 + J, ω0, ω0 − J)` order.
    pub peaks: Vec<PeakPhase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTheoryReport {
    pub j: f64,
    pub t2: f64,
    pub panels: Vec<TheoryPanel>,
    pub files: Vec<PathBuf>,
}

impl SpectrumTheoryReport {
    pub fn panel(&self, kind: SignalKind, theta_deg: f64) -> Option<&TheoryPanel> {
        self.panels.iter().find(|p| p.kind == kind && p.theta_deg == theta_deg)
    }
}

/// Spectra of the closed-form signals for both field placements over the
/// θ list, with `T2 = jt2 / J`.
pub fn run_spectrum_theory(cfg: &ExperimentConfig) -> Result<SpectrumTheoryReport> {
    cfg.validate()?;
    let dir = cfg.prepare_output()?;
    let molecule = cfg.molecule()?;
    let j = center_side_coupling(&molecule)?;
    let t2 = cfg.jt2 / j;
    let omega0 = cfg.receiver_offset();
    let axis = PpmAxis::for_receiver(&molecule, OBSERVED, omega0)?;
    let centers = line_centers(omega0, j);

    let mut panels = Vec::new();
    for kind in [SignalKind::CenterField, SignalKind::SideField] {
        for &theta_deg in &cfg.thetas_deg {
            let p = SignalModelParams::new(theta_deg.to_radians(), j, omega0, t2)?;
            let fid = analytic_fid(&p, kind, cfg.points, cfg.dwell_ms * 1e-3)?;
            let spec = spectrum(&fid, cfg.zero_fill)?.with_ppm_axis(axis);
            let peaks = extract_peak_phases(&spec, &centers, j / 4.0)?;
            panels.push(TheoryPanel { kind, theta_deg, spectrum: spec, peaks });
        }
    }

    let mut files = Vec::new();
    let mut table = create(&dir, "spectrum_theory_peaks.csv", &mut files)?;
    writeln!(table, "kind,theta_deg,line,center_ppm,phase_deg,amplitude")?;
    let mut plot = Plot::new(format!("Theoretical spectra, J·T2 = {}", cfg.jt2), "shift (ppm)", "Re S (a.u.)").reversed_x();
    for panel in &panels {
        let stem = format!("theory_{}_theta{}", panel.kind.as_str(), angle_tag(panel.theta_deg));
        panel.spectrum.write_csv(create(&dir, &format!("{stem}_spectrum.csv"), &mut files)?)?;
        write_peaks_csv(create(&dir, &format!("{stem}_peaks.csv"), &mut files)?, &panel.peaks, |w| axis.ppm(w))?;
        for (name, pk) in super::LINE_NAMES.iter().zip(&panel.peaks) {
            writeln!(
                table,
                "{},{},{},{},{},{}",
                panel.kind.as_str(),
                panel.theta_deg,
                name,
                axis.ppm(pk.center),
                pk.phase.to_degrees(),
                pk.amplitude
            )?;
        }
        let (x, y) = windowed_real(&panel.spectrum, &axis, omega0 - 2.0 * j, omega0 + 2.0 * j);
        plot.push(Series::new(format!("{} {}°", panel.kind.as_str(), panel.theta_deg), x, y, Style::Line));
    }
    table.flush()?;
    files.extend(plot.write(&dir, "spectrum_theory")?);
    Ok(SpectrumTheoryReport { j, t2, panels, files })
}
