use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::plot::{Plot, Series, Style};
use super::{create, ExperimentConfig};
use crate::acquisition::{fit_decay, DecayFit, DecayModel, Fid};
use crate::noise::{DecouplingMode, SampleSpec, ValidityMonitor};
use crate::pulseprog::{Event, Millis, PulseProgram};
use crate::sim::{run_program, InitialState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FidRun {
    /// Preset number, 1..=4.
    pub sample: usize,
    pub mode: DecouplingMode,
    pub fid: Fid,
    /// Fit of `|FID|` against time.
    pub fit: DecayFit,
}

impl FidRun {
    /// The model curve drawn with the trace: the exponential fit in full
    /// mode, the stretched fit in selective mode.
    pub fn model_curve(&self, t: f64) -> f64 {
        match self.mode {
            DecouplingMode::Full => self.fit.exponential.eval(t),
            _ => self.fit.stretched.eval(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FidAppendixReport {
    pub runs: Vec<FidRun>,
    pub validity: ValidityMonitor,
    pub files: Vec<PathBuf>,
}

impl FidAppendixReport {
    pub fn run(&self, sample: usize, mode: DecouplingMode) -> Option<&FidRun> {
        self.runs.iter().find(|r| r.sample == sample && r.mode == mode)
    }
}

/// FIDs from `ρ_i` for every sample preset in full and selective
/// decoupling, with decay fits. A decoupling override restricts the modes.
pub fn run_fid_appendix(cfg: &ExperimentConfig) -> Result<FidAppendixReport> {
    cfg.validate()?;
    let modes = match cfg.decoupling {
        None => vec![DecouplingMode::Full, DecouplingMode::Selective],
        Some(DecouplingMode::None) => {
            return Err(Error::Config("fid-appendix supports full or selective decoupling".into()));
        }
        Some(m) => vec![m],
    };
    let dir = cfg.prepare_output()?;
    let molecule = cfg.molecule()?;
    let base = cfg.sim_config(&molecule)?;
    let presets = SampleSpec::presets();

    let tasks: Vec<(usize, DecouplingMode)> =
        (1..=presets.len()).flat_map(|s| modes.iter().map(move |&m| (s, m))).collect();
    let results: Vec<(FidRun, ValidityMonitor)> = tasks
        .par_iter()
        .map(|&(sample, mode)| -> Result<_> {
            let program = PulseProgram::from_events(vec![
                Event::Decouple(mode),
                Event::Acquire { points: cfg.fid_points, dwell: Millis(cfg.fid_dwell_ms) },
            ]);
            let sim = base.clone().with_sample(presets[sample - 1].clone());
            let out = run_program(&program, &sim, &InitialState::RhoI)?;
            let fid = out.fid.ok_or_else(|| Error::InvalidParameter("run recorded no FID".into()))?;
            let t: Vec<f64> = fid.times().collect();
            let y: Vec<f64> = fid.samples().iter().map(|z| z.norm()).collect();
            let fit = fit_decay(&t, &y)?;
            Ok((FidRun { sample, mode, fid, fit }, out.monitor))
        })
        .collect::<Result<_>>()?;

    let mut validity = ValidityMonitor::new(cfg.check_every, 1e-10, crate::spin::EIGEN_FLOOR);
    let mut files = Vec::new();
    let mut table = create(&dir, "fid_appendix.csv", &mut files)?;
    writeln!(table, "sample,mode,model,time_constant_ms,amplitude,residual,stretched_time_constant_ms,beta,score")?;
    let mut runs = Vec::new();
    for (run, monitor) in results {
        validity.absorb(&monitor);
        let f = &run.fit;
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            run.sample,
            run.mode,
            f.model.as_str(),
            f.exponential.time_constant * 1e3,
            f.exponential.amplitude,
            f.exponential.residual,
            f.stretched.time_constant * 1e3,
            f.stretched.beta,
            f.score
        )?;

        let stem = format!("fid_sample{}_{}", run.sample, run.mode);
        run.fid.write_csv(create(&dir, &format!("{stem}.csv"), &mut files)?)?;
        let t_ms: Vec<f64> = run.fid.times().map(|t| t * 1e3).collect();
        let mut plot = Plot::new(format!("Sample {}, {} decoupling", run.sample, run.mode), "t (ms)", "signal");
        plot.push(Series::new("re", t_ms.clone(), run.fid.samples().iter().map(|z| z.re).collect(), Style::Line));
        plot.push(Series::new("im", t_ms.clone(), run.fid.samples().iter().map(|z| z.im).collect(), Style::Line));
        let label = if run.mode == DecouplingMode::Full { DecayModel::Exponential } else { DecayModel::Stretched };
        let model = run.fid.times().map(|t| run.model_curve(t)).collect();
        plot.push(Series::new(format!("{} fit", label.as_str()), t_ms, model, Style::Dashed));
        files.extend(plot.write(&dir, &stem)?);
        runs.push(run);
    }
    table.flush()?;
    Ok(FidAppendixReport { runs, validity, files })
}
