use std::io::{Read, Write};

use num_complex::Complex64;

use crate::hamiltonian::DiagonalHamiltonian;
use crate::noise::{step_count, Evolver, NoiseSpec, ValidityMonitor};
use crate::spin::DensityMatrix;
use crate::{Error, Result};

/// Complex free-induction decay sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Fid {
    samples: Vec<Complex64>,
    dwell_s: f64,
    start_time_s: f64,
}

impl Fid {
    pub fn new(samples: Vec<Complex64>, dwell_s: f64, start_time_s: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!("an FID needs >= 2 samples, got {}", samples.len())));
        }
        if !(dwell_s.is_finite() && dwell_s > 0.0) {
            return Err(Error::InvalidParameter(format!("dwell must be > 0, got {dwell_s}")));
        }
        Ok(Fid { samples, dwell_s, start_time_s })
    }

    /// Samples `f(t)` at `t = start + m·dwell`.
    pub fn from_fn(points: usize, dwell_s: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..points).map(|m| f(m as f64 * dwell_s)).collect();
        Fid::new(samples, dwell_s, 0.0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dwell_s(&self) -> f64 {
        self.dwell_s
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |m| self.start_time_s + m as f64 * self.dwell_s)
    }

    pub fn scaled(&self, k: Complex64) -> Fid {
        Fid { samples: self.samples.iter().map(|s| s * k).collect(), ..*self }
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: Complex64, other: &Fid, b: Complex64) -> Result<Fid> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Ok(Fid { samples, ..*self })
    }

    /// CSV with header `t_s,re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_s", "re", "im"])?;
        for (t, s) in self.times().zip(&self.samples) {
            wr.write_record([t.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Fid> {
        let mut rd = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad FID CSV field {i}")))
            };
            times.push(field(0)?);
            samples.push(Complex64::new(field(1)?, field(2)?));
        }
        if times.len() < 2 {
            return Err(Error::Config("FID CSV needs at least two rows".into()));
        }
        Fid::new(samples, times[1] - times[0], times[0])
    }
}

/// Records `Tr[(σx + iσy)_spin ρ(m·dwell)]` for `m = 0..points`, evolving
/// `rho` under `h` and `noise` between samples. `rho` is left at the state
/// of the last sample.
pub fn acquire_fid(
    rho: &mut DensityMatrix,
    spin: &str,
    h: &DiagonalHamiltonian,
    noise: &NoiseSpec,
    points: usize,
    dwell_s: f64,
    max_dt: f64,
    mut monitor: Option<&mut ValidityMonitor>,
) -> Result<Fid> {
    let idx = rho.index_of(spin)?;
    if points < 2 || !(dwell_s > 0.0) {
        return Err(Error::InvalidParameter("acquisition needs >= 2 points and dwell > 0".into()));
    }
    let steps = step_count(dwell_s, max_dt);
    let ev = Evolver::for_state(h, noise, rho, dwell_s / steps as f64)?;
    let mut samples = Vec::with_capacity(points);
    samples.push(rho.transverse(idx));
    for _ in 1..points {
        ev.run(rho, steps, monitor.as_deref_mut())?;
        samples.push(rho.transverse(idx));
    }
    Fid::new(samples, dwell_s, 0.0)
}
