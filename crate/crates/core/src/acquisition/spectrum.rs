use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::fid::Fid;
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// Maps spectrum frequencies (rad/s) to chemical shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpmAxis {
    /// Shift of the spectrum's zero frequency, ppm.
    pub zero_ppm: f64,
    /// Conversion factor, rad/s per ppm.
    pub rad_s_per_ppm: f64,
}

impl PpmAxis {
    /// Axis for `spin` observed with the given receiver offset: the spin's
    /// own line sits at `receiver_offset` and at its tabulated shift.
    pub fn for_receiver(system: &SpinSystem, spin: &str, receiver_offset: f64) -> Result<Self> {
        let s = &system.spins()[system.index_of(spin)?];
        let k = system.rad_s_per_ppm(&s.species)?;
        Ok(PpmAxis { zero_ppm: s.ppm - receiver_offset / k, rad_s_per_ppm: k })
    }

    pub fn ppm(&self, omega: f64) -> f64 {
        self.zero_ppm + omega / self.rad_s_per_ppm
    }

    pub fn omega(&self, ppm: f64) -> f64 {
        (ppm - self.zero_ppm) * self.rad_s_per_ppm
    }
}

/// Discrete spectrum of an FID, bins in ascending frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    freqs: Vec<f64>,
    fid_len: usize,
    dwell_s: f64,
    ppm_axis: Option<PpmAxis>,
}

/// Forward DFT `X_k = Σ_m x_m e^{−2πikm/N}` of the zero-filled FID, so a
/// sample train `e^{iωt}` peaks at `+ω`. `zero_fill` multiplies the length.
pub fn spectrum(fid: &Fid, zero_fill: usize) -> Result<Spectrum> {
    if zero_fill == 0 {
        return Err(Error::InvalidParameter("zero fill factor must be >= 1".into()));
    }
    let n = fid.len() * zero_fill;
    let mut buf = fid.samples().to_vec();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // fftshift: negative frequencies first
    let half = n / 2;
    let shift = n - half;
    buf.rotate_right(half);
    let bw = TAU / (n as f64 * fid.dwell_s());
    let freqs = (0..n).map(|k| (k as f64 - (n - shift) as f64) * bw).collect();
    Ok(Spectrum { bins: buf, freqs, fid_len: fid.len(), dwell_s: fid.dwell_s(), ppm_axis: None })
}

impl Spectrum {
    pub fn with_ppm_axis(mut self, axis: PpmAxis) -> Self {
        self.ppm_axis = Some(axis);
        self
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Bin frequencies in rad/s.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn ppm_axis(&self) -> Option<&PpmAxis> {
        self.ppm_axis.as_ref()
    }

    pub fn ppm(&self) -> Option<Vec<f64>> {
        self.ppm_axis.map(|a| self.freqs.iter().map(|&f| a.ppm(f)).collect())
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Length of the FID before zero filling.
    pub fn fid_len(&self) -> usize {
        self.fid_len
    }

    pub fn dwell_s(&self) -> f64 {
        self.dwell_s
    }

    pub fn bin_width(&self) -> f64 {
        TAU / (self.bins.len() as f64 * self.dwell_s)
    }

    /// Index of the bin closest to `omega`.
    pub fn nearest_bin(&self, omega: f64) -> usize {
        let i = ((omega - self.freqs[0]) / self.bin_width()).round();
        i.clamp(0.0, (self.bins.len() - 1) as f64) as usize
    }

    /// Inverse transform back to the first `fid_len` samples.
    pub fn inverse(&self) -> Result<Fid> {
        let n = self.bins.len();
        let mut buf = self.bins.clone();
        buf.rotate_left(n / 2);
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.truncate(self.fid_len);
        Fid::new(buf.into_iter().map(|z| z * scale).collect(), self.dwell_s, 0.0)
    }

    /// `|Σ|X_k|² − N Σ|x_m|²|`, relative to the larger side.
    pub fn parseval_error(&self, fid: &Fid) -> f64 {
        let lhs: f64 = self.bins.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = self.bins.len() as f64 * fid.samples().iter().map(|z| z.norm_sqr()).sum::<f64>();
        (lhs - rhs).abs() / lhs.max(rhs).max(f64::MIN_POSITIVE)
    }

    /// Local maxima of `|X|` above `fraction` of the global maximum, in
    /// ascending frequency order, as (frequency, bin) pairs.
    pub fn peaks(&self, fraction: f64) -> Vec<(f64, Complex64)> {
        let mags: Vec<f64> = self.bins.iter().map(|z| z.norm()).collect();
        let top = mags.iter().copied().fold(0.0, f64::max);
        let n = mags.len();
        (0..n)
            .filter(|&k| {
                let left = if k == 0 { 0.0 } else { mags[k - 1] };
                let right = if k + 1 == n { 0.0 } else { mags[k + 1] };
                mags[k] >= fraction * top && mags[k] > left && mags[k] >= right
            })
            .map(|k| (self.freqs[k], self.bins[k]))
            .collect()
    }

    /// CSV with header `freq_rads,ppm,re,im,abs`; `ppm` is `NaN` without an
    /// axis.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["freq_rads", "ppm", "re", "im", "abs"])?;
        for (f, z) in self.freqs.iter().zip(&self.bins) {
            let ppm = self.ppm_axis.map_or(f64::NAN, |a| a.ppm(*f));
            wr.write_record([f.to_string(), ppm.to_string(), z.re.to_string(), z.im.to_string(), z.norm().to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}
