use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::plot::{Plot, Series, Style};
use super::{angle_tag, center_side_coupling, create, line_centers, windowed_real, wrap_deg, ExperimentConfig, LINE_NAMES};
use crate::acquisition::{
    analytic_fid, extract_peak_phases, spectrum, write_peaks_csv, Fid, PeakPhase, PpmAxis, SignalKind, SignalModelParams, Spectrum,
};
use crate::noise::{DecouplingMode, ValidityMonitor};
use crate::pulseprog::{builtin_sequence, Builtin, BuiltinParams};
use crate::sim::{run_program, OBSERVED};
use crate::{Error, Result};

/// One line of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub sequence: Builtin,
    pub theta_deg: f64,
    pub line: &'static str,
    pub center: f64,
    pub center_ppm: f64,
    pub measured_deg: f64,
    pub expected_deg: f64,
    /// Phase read from the closed-form signal with the same acquisition.
    pub analytic_deg: f64,
    /// `measured − expected`, wrapped to (−180°, 180°].
    pub error_deg: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseSweepReport {
    pub rows: Vec<PhaseRow>,
    pub max_error_deg: f64,
    /// Largest bin difference between the two sequences at θ = 0, relative
    /// to the largest bin (`None` when 0 is not in the θ list).
    pub reference_mismatch: Option<f64>,
    pub validity: ValidityMonitor,
    pub files: Vec<PathBuf>,
}

impl PhaseSweepReport {
    pub fn rows_for(&self, sequence: Builtin, theta_deg: f64) -> Vec<&PhaseRow> {
        self.rows.iter().filter(|r| r.sequence == sequence && r.theta_deg == theta_deg).collect()
    }
}

struct Run {
    sequence: Builtin,
    theta_deg: f64,
    fid: Fid,
    spectrum: Spectrum,
    peaks: Vec<PeakPhase>,
    analytic: Vec<PeakPhase>,
    monitor: ValidityMonitor,
}

fn kind_of(b: Builtin) -> SignalKind {
    if b == Builtin::FieldOnCs {
        SignalKind::SideField
    } else {
        SignalKind::CenterField
    }
}

/// Full pipeline (state preparation, circuit, noisy FID, spectrum, line
/// phases) for the field-on-center and field-on-sides sequences over the θ
/// list, under full decoupling.
pub fn run_phase_sweep(cfg: &ExperimentConfig) -> Result<PhaseSweepReport> {
    cfg.validate()?;
    if let Some(m) = cfg.decoupling {
        if m != DecouplingMode::Full {
            return Err(Error::Config(format!("phase-sweep runs with full decoupling, got `{m}`")));
        }
    }
    let dir = cfg.prepare_output()?;
    let molecule = cfg.molecule()?;
    let initial = cfg.initial_state()?;
    let sim = cfg.sim_config(&molecule)?;
    let j = center_side_coupling(&molecule)?;
    let omega0 = cfg.receiver_offset();
    let axis = PpmAxis::for_receiver(&molecule, OBSERVED, omega0)?;
    let centers = line_centers(omega0, j);
    let dwell = cfg.dwell_ms * 1e-3;

    let tasks: Vec<(Builtin, f64)> = cfg
        .thetas_deg
        .iter()
        .flat_map(|&t| [(Builtin::FieldOnCc, t), (Builtin::FieldOnCs, t)])
        .collect();
    let runs: Vec<Run> = tasks
        .par_iter()
        .map(|&(sequence, theta_deg)| -> Result<Run> {
            let params = BuiltinParams {
                theta_deg,
                tau_ms: cfg.tau_ms,
                entangling: cfg.entangling,
                decoupling: DecouplingMode::Full,
                points: cfg.points,
                dwell_ms: cfg.dwell_ms,
                ..Default::default()
            };
            let program = builtin_sequence(&molecule, sequence, &params)?;
            let out = run_program(&program, &sim, &initial)?;
            let fid = out.fid.ok_or_else(|| Error::InvalidParameter("run recorded no FID".into()))?;
            let spec = spectrum(&fid, cfg.zero_fill)?.with_ppm_axis(axis);
            let peaks = extract_peak_phases(&spec, &centers, j / 4.0)?;
            let model = SignalModelParams::new(theta_deg.to_radians(), j, omega0, f64::INFINITY)?;
            let reference = spectrum(&analytic_fid(&model, kind_of(sequence), cfg.points, dwell)?, cfg.zero_fill)?;
            let analytic = extract_peak_phases(&reference, &centers, j / 4.0)?;
            Ok(Run { sequence, theta_deg, fid, spectrum: spec, peaks, analytic, monitor: out.monitor })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut validity = ValidityMonitor::new(cfg.check_every, 1e-10, crate::spin::EIGEN_FLOOR);
    for r in &runs {
        validity.absorb(&r.monitor);
        let expected = kind_of(r.sequence).expected_phases(r.theta_deg.to_radians());
        for k in 0..3 {
            let measured_deg = r.peaks[k].phase.to_degrees();
            let expected_deg = wrap_deg(expected[k].to_degrees());
            rows.push(PhaseRow {
                sequence: r.sequence,
                theta_deg: r.theta_deg,
                line: LINE_NAMES[k],
                center: centers[k],
                center_ppm: axis.ppm(centers[k]),
                measured_deg,
                expected_deg,
                analytic_deg: r.analytic[k].phase.to_degrees(),
                error_deg: wrap_deg(measured_deg - expected_deg),
                amplitude: r.peaks[k].amplitude,
            });
        }
    }
    let max_error_deg = rows.iter().map(|r| r.error_deg.abs()).fold(0.0, f64::max);
    let reference_mismatch = {
        let at_zero = |b: Builtin| runs.iter().find(|r| r.sequence == b && r.theta_deg == 0.0);
        match (at_zero(Builtin::FieldOnCc), at_zero(Builtin::FieldOnCs)) {
            (Some(a), Some(b)) => {
                let scale = a.spectrum.bins().iter().map(|z| z.norm()).fold(0.0, f64::max);
                let diff = a.spectrum.bins().iter().zip(b.spectrum.bins()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                Some(diff / scale)
            }
            _ => None,
        }
    };

    let mut files = Vec::new();
    let mut table = create(&dir, "phase_sweep.csv", &mut files)?;
    writeln!(table, "sequence,theta_deg,line,center_ppm,measured_deg,expected_deg,analytic_deg,error_deg,amplitude")?;
    for r in &rows {
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            r.sequence, r.theta_deg, r.line, r.center_ppm, r.measured_deg, r.expected_deg, r.analytic_deg, r.error_deg, r.amplitude
        )?;
    }
    table.flush()?;

    let mut spectra = Plot::new("Simulated spectra, full decoupling", "shift (ppm)", "Re S (a.u.)").reversed_x();
    for r in &runs {
        let stem = format!("{}_theta{}", r.sequence, angle_tag(r.theta_deg));
        r.fid.write_csv(create(&dir, &format!("{stem}_fid.csv"), &mut files)?)?;
        r.spectrum.write_csv(create(&dir, &format!("{stem}_spectrum.csv"), &mut files)?)?;
        write_peaks_csv(create(&dir, &format!("{stem}_peaks.csv"), &mut files)?, &r.peaks, |w| axis.ppm(w))?;
        let (x, y) = windowed_real(&r.spectrum, &axis, omega0 - 2.0 * j, omega0 + 2.0 * j);
        spectra.push(Series::new(format!("{} {}°", r.sequence, r.theta_deg), x, y, Style::Line));
    }
    files.extend(spectra.write(&dir, "phase_sweep_spectra")?);

    let mut plot = Plot::new("Line phases vs θ", "θ (deg)", "phase (deg)");
    for seq in [Builtin::FieldOnCc, Builtin::FieldOnCs] {
        for line in LINE_NAMES {
            let sel: Vec<&PhaseRow> = rows.iter().filter(|r| r.sequence == seq && r.line == line).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.theta_deg).collect();
            plot.push(Series::new(format!("{seq} {line}"), x.clone(), sel.iter().map(|r| r.measured_deg).collect(), Style::Points));
            plot.push(Series::new(format!("{seq} {line} expected"), x, sel.iter().map(|r| r.expected_deg).collect(), Style::Dashed));
        }
    }
    files.extend(plot.write(&dir, "phase_sweep")?);

    Ok(PhaseSweepReport { rows, max_error_deg, reference_mismatch, validity, files })
}
