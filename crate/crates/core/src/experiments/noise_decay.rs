use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::plot::{Plot, Series, Style};
use super::{create, ExperimentConfig};
use crate::acquisition::{fit_decay, DecayFit};
use crate::noise::{DecouplingMode, ValidityMonitor};
use crate::pulseprog::{builtin_sequence, Builtin, BuiltinParams};
use crate::sim::run_program;
use crate::{Error, Result};

/// Time span the loss figure of merit refers to.
pub const LOSS_WINDOW_S: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayCurve {
    /// Echo, all protons decoupled.
    Full,
    /// Echo, side-spin protons left coupled.
    Selective,
    /// XY-8 on all carbons, side-spin protons left coupled.
    SelectiveXy8,
}

impl DecayCurve {
    pub const ALL: [DecayCurve; 3] = [DecayCurve::Full, DecayCurve::Selective, DecayCurve::SelectiveXy8];

    pub fn as_str(self) -> &'static str {
        match self {
            DecayCurve::Full => "full",
            DecayCurve::Selective => "selective",
            DecayCurve::SelectiveXy8 => "selective_xy8",
        }
    }

    pub fn decoupling(self) -> DecouplingMode {
        match self {
            DecayCurve::Full => DecouplingMode::Full,
            _ => DecouplingMode::Selective,
        }
    }

    /// Sensing sequence for `τ = n · unit`.
    fn params(self, n: u32, unit_ms: f64, cfg: &ExperimentConfig) -> (Builtin, BuiltinParams) {
        let base = BuiltinParams {
            theta_deg: 0.0,
            entangling: cfg.entangling,
            decoupling: self.decoupling(),
            // only the first sample is used
            points: 2,
            dwell_ms: cfg.dwell_ms,
            ..Default::default()
        };
        match self {
            DecayCurve::SelectiveXy8 => (Builtin::Xy8Sense, BuiltinParams { tau_ms: unit_ms / 8.0, n_cycles: n, ..base }),
            _ => (Builtin::EchoSense, BuiltinParams { tau_ms: unit_ms * n as f64, ..base }),
        }
    }
}

impl fmt::Display for DecayCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub n: u32,
    pub tau_s: f64,
    /// `|Tr[(σx + iσy)_CC ρ]|` at the start of the readout.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub curve: DecayCurve,
    pub points: Vec<DecayPoint>,
    pub fit: DecayFit,
    /// `1 − exp(−50 ms / T)` from the exponential fit.
    pub loss_50ms: f64,
}

impl CurveReport {
    pub fn amplitude_at(&self, n: u32) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.amplitude)
    }
}

#[derive(Debug, Clone)]
pub struct NoiseDecayReport {
    pub curves: Vec<CurveReport>,
    pub validity: ValidityMonitor,
    pub files: Vec<PathBuf>,
}

impl NoiseDecayReport {
    pub fn curve(&self, c: DecayCurve) -> Option<&CurveReport> {
        self.curves.iter().find(|r| r.curve == c)
    }
}

/// Signal amplitude against sensing time `τ = n · tau_unit`, `n = 1..=n_max`,
/// for the three noise environments. A decoupling override restricts the
/// run to the curves using that mode.
pub fn run_noise_decay(cfg: &ExperimentConfig) -> Result<NoiseDecayReport> {
    cfg.validate()?;
    let curves: Vec<DecayCurve> = match cfg.decoupling {
        None => DecayCurve::ALL.to_vec(),
        Some(DecouplingMode::None) => {
            return Err(Error::Config("noise-decay supports full or selective decoupling".into()));
        }
        Some(m) => DecayCurve::ALL.into_iter().filter(|c| c.decoupling() == m).collect(),
    };
    let dir = cfg.prepare_output()?;
    let molecule = cfg.molecule()?;
    let initial = cfg.initial_state()?;
    let mut sim = cfg.sim_config(&molecule)?;
    sim.record_fid = false;

    let tasks: Vec<(DecayCurve, u32)> = curves.iter().flat_map(|&c| (1..=cfg.n_max).map(move |n| (c, n))).collect();
    let results: Vec<(DecayPoint, ValidityMonitor)> = tasks
        .par_iter()
        .map(|&(curve, n)| -> Result<_> {
            let (which, params) = curve.params(n, cfg.tau_unit_ms, cfg);
            let program = builtin_sequence(&molecule, which, &params)?;
            let out = run_program(&program, &sim, &initial)?;
            let p = DecayPoint { n, tau_s: n as f64 * cfg.tau_unit_ms * 1e-3, amplitude: out.first_sample.norm() };
            Ok((p, out.monitor))
        })
        .collect::<Result<_>>()?;

    let mut validity = ValidityMonitor::new(cfg.check_every, 1e-10, crate::spin::EIGEN_FLOOR);
    let mut reports = Vec::new();
    for (k, &curve) in curves.iter().enumerate() {
        let chunk = &results[k * cfg.n_max as usize..(k + 1) * cfg.n_max as usize];
        chunk.iter().for_each(|(_, m)| validity.absorb(m));
        let points: Vec<DecayPoint> = chunk.iter().map(|(p, _)| *p).collect();
        let t: Vec<f64> = points.iter().map(|p| p.tau_s).collect();
        let y: Vec<f64> = points.iter().map(|p| p.amplitude).collect();
        let fit = fit_decay(&t, &y)?;
        let loss_50ms = 1.0 - (-LOSS_WINDOW_S / fit.exponential.time_constant).exp();
        reports.push(CurveReport { curve, points, fit, loss_50ms });
    }

    let mut files = Vec::new();
    let mut table = create(&dir, "noise_decay.csv", &mut files)?;
    writeln!(table, "curve,n,tau_ms,amplitude")?;
    for r in &reports {
        for p in &r.points {
            writeln!(table, "{},{},{},{}", r.curve, p.n, p.tau_s * 1e3, p.amplitude)?;
        }
    }
    table.flush()?;
    let mut fits = create(&dir, "noise_decay_fits.csv", &mut files)?;
    writeln!(fits, "curve,model,time_constant_ms,amplitude,residual,stretched_time_constant_ms,beta,score,loss_50ms")?;
    for r in &reports {
        let f = &r.fit;
        writeln!(
            fits,
            "{},{},{},{},{},{},{},{},{}",
            r.curve,
            f.model.as_str(),
            f.exponential.time_constant * 1e3,
            f.exponential.amplitude,
            f.exponential.residual,
            f.stretched.time_constant * 1e3,
            f.stretched.beta,
            f.score,
            r.loss_50ms
        )?;
    }
    fits.flush()?;

    let mut plot = Plot::new("Signal amplitude vs sensing time", "τ (ms)", "amplitude");
    for r in &reports {
        let x: Vec<f64> = r.points.iter().map(|p| p.tau_s * 1e3).collect();
        plot.push(Series::new(r.curve.as_str(), x.clone(), r.points.iter().map(|p| p.amplitude).collect(), Style::Points));
        let fx: Vec<f64> = (0..=100).map(|i| x[x.len() - 1] * i as f64 / 100.0).collect();
        let fy = fx.iter().map(|t| r.fit.exponential.eval(t * 1e-3)).collect();
        plot.push(Series::new(format!("{} fit", r.curve), fx, fy, Style::Dashed));
    }
    files.extend(plot.write(&dir, "noise_decay")?);

    Ok(NoiseDecayReport { curves: reports, validity, files })
}
