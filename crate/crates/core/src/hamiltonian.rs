//! Secular ZZ Hamiltonian in diagonal form.
//!
//! In the weak-coupling regime the Hamiltonian is diagonal in the
//! computational basis:
//!
//! ```text
//! H = Σ_j (ω_j − f_j) σz_j / 2 + Σ_{j<k} J_jk σz_j σz_k / 4
//! ```
//!
//! where `f_j` is the rotating-frame offset of spin `j`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::spin::{embed_pauli, CMatrix, Operator, PauliAxis, SpinSystem};
use crate::{Error, Result};

/// Ratio `|Δω| / J` below which the secular approximation is flagged.
pub const SECULAR_RATIO: f64 = 10.0;

/// Per-spin rotating-frame offsets in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    offsets: Vec<f64>,
}

impl Frame {
    pub fn new(offsets: Vec<f64>) -> Self {
        Frame { offsets }
    }

    /// Laboratory frame: no offsets.
    pub fn lab(system: &SpinSystem) -> Self {
        Frame { offsets: vec![0.0; system.len()] }
    }

    /// Each spin rotates at its species carrier.
    pub fn carriers(system: &SpinSystem) -> Self {
        Frame { offsets: (0..system.len()).map(|i| system.carrier_rad_s(i)).collect() }
    }

    /// Spins of `anchor`'s species rotate at `anchor`'s Larmor frequency
    /// minus `residual` (so `anchor` precesses at `residual`); other species
    /// use their carriers.
    pub fn anchored(system: &SpinSystem, anchor: &str, residual: f64) -> Result<Self> {
        let a = system.index_of(anchor)?;
        let species = &system.spins()[a].species;
        let reference = system.larmor_rad_s(a) - residual;
        let offsets = (0..system.len())
            .map(|i| {
                if &system.spins()[i].species == species {
                    reference
                } else {
                    system.carrier_rad_s(i)
                }
            })
            .collect();
        Ok(Frame { offsets })
    }

    /// Frame used while running gate sequences: CC exactly on resonance.
    pub fn circuit(system: &SpinSystem) -> Result<Self> {
        Self::anchored(system, "CC", 0.0)
    }

    /// Frame used while acquiring: CC precesses at `receiver_offset`.
    pub fn receiver(system: &SpinSystem, receiver_offset: f64) -> Result<Self> {
        Self::anchored(system, "CC", receiver_offset)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }
}

/// A diagonal Hamiltonian: energies in rad/s, computational-basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHamiltonian {
    energies: Vec<f64>,
    frame_offsets: Vec<f64>,
    /// Rotating-frame precession frequency of each spin.
    omegas: Vec<f64>,
    couplings: Vec<f64>,
    warnings: Vec<String>,
}

pub fn build_hamiltonian(system: &SpinSystem, frame: &Frame) -> Result<DiagonalHamiltonian> {
    let n = system.len();
    if frame.offsets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: frame.offsets.len() });
    }
    if frame.offsets.iter().any(|f| !f.is_finite()) {
        return Err(Error::InvalidParameter("non-finite frame offset".into()));
    }
    let omegas: Vec<f64> = (0..n).map(|i| system.larmor_rad_s(i) - frame.offsets[i]).collect();
    let mut couplings = vec![0.0; n * n];
    let mut warnings = Vec::new();
    for j in 0..n {
        for k in 0..n {
            couplings[j * n + k] = system.coupling(j, k);
        }
        for k in j + 1..n {
            let jk = system.coupling(j, k);
            let gap = (system.larmor_rad_s(j) - system.larmor_rad_s(k)).abs();
            if jk > 0.0 && gap < SECULAR_RATIO * jk {
                let msg = format!(
                    "secular approximation strained for {}-{}: |Δω| = {gap:.3} rad/s, J = {jk:.3} rad/s",
                    system.spins()[j].name,
                    system.spins()[k].name
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let energies = diagonal_energies(&omegas, &couplings);
    Ok(DiagonalHamiltonian { energies, frame_offsets: frame.offsets.clone(), omegas, couplings, warnings })
}

fn diagonal_energies(omegas: &[f64], couplings: &[f64]) -> Vec<f64> {
    let n = omegas.len();
    let sign = |a: usize, j: usize| if a >> (n - 1 - j) & 1 == 0 { 1.0 } else { -1.0 };
    (0..1usize << n)
        .map(|a| {
            let mut e = 0.0;
            for j in 0..n {
                let sj = sign(a, j);
                e += omegas[j] * sj / 2.0;
                for k in j + 1..n {
                    e += couplings[j * n + k] * sj * sign(a, k) / 4.0;
                }
            }
            e
        })
        .collect()
}

impl DiagonalHamiltonian {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn frame_offsets(&self) -> &[f64] {
        &self.frame_offsets
    }

    /// Rotating-frame precession frequency of each spin.
    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_spins(&self) -> usize {
        self.omegas.len()
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Largest |E_a − E_b|, which bounds the phase advance per unit time.
    pub fn bandwidth(&self) -> f64 {
        let (lo, hi) = self
            .energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        hi - lo
    }

    /// Dense matrix rebuilt from Pauli embeddings.
    pub fn to_dense(&self, system: &SpinSystem) -> Result<CMatrix> {
        let n = self.n_spins();
        if system.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: system.len() });
        }
        let labels = system.labels();
        let d = self.dim();
        let mut h = CMatrix::zeros(d, d);
        let z: Vec<CMatrix> = labels
            .iter()
            .map(|l| embed_pauli(system, l, PauliAxis::Z).map(Operator::into_matrix))
            .collect::<Result<_>>()?;
        for j in 0..n {
            h += &z[j] * Complex64::new(self.omegas[j] / 2.0, 0.0);
            for k in j + 1..n {
                let jk = self.couplings[j * n + k];
                if jk != 0.0 {
                    h += &z[j] * &z[k] * Complex64::new(jk / 4.0, 0.0);
                }
            }
        }
        Ok(h)
    }

    /// Diagonal of `exp(−iHt)`.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect()
    }

    pub fn free_propagator(&self, t: f64) -> Result<Operator> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("evolution time must be >= 0, got {t}")));
        }
        let diag = nalgebra::DVector::from_vec(self.phases(t));
        Ok(Operator::unitary_unchecked(CMatrix::from_diagonal(&diag)))
    }
}

/// How the entangling free evolution U_E is timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglingMode {
    /// Delay exactly π/J, followed by a compensating Z on the side spins.
    #[default]
    Ideal,
    /// Delay an integer number of side-spin precession periods closest to
    /// π/J, so the side-spin offset phase vanishes on its own.
    Quantized,
}

/// Timing of the entangling delay in the circuit frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglingDelay {
    pub duration_s: f64,
    /// Z angle the side spins pick up from their offset over the delay.
    pub side_phase_rad: f64,
    /// Number of side-spin periods (quantized mode only).
    pub periods: Option<u64>,
}

pub fn entangling_delay(system: &SpinSystem, mode: EntanglingMode) -> Result<EntanglingDelay> {
    system.require(&["CC", "CS1", "CS2"])?;
    let (cc, cs) = (system.index_of("CC")?, system.index_of("CS1")?);
    let j = system.coupling(cc, cs);
    if j <= 0.0 {
        return Err(Error::InvalidSystem("CC-CS1 coupling must be positive".into()));
    }
    let dw = system.larmor_rad_s(cs) - system.larmor_rad_s(cc);
    let ideal = PI / j;
    match mode {
        EntanglingMode::Ideal => {
            Ok(EntanglingDelay { duration_s: ideal, side_phase_rad: dw * ideal, periods: None })
        }
        EntanglingMode::Quantized => {
            if dw == 0.0 {
                return Err(Error::InvalidSystem("CC and CS1 are degenerate".into()));
            }
            let period = TAU / dw.abs();
            let n = (ideal / period).round().max(1.0);
            let t = n * period;
            Ok(EntanglingDelay { duration_s: t, side_phase_rad: dw * t, periods: Some(n as u64) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin_energies() {
        let sys = SpinSystem::with_offsets(&[("A", TAU * 100.0)], &[]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        assert!((h.energies()[0] - PI * 100.0).abs() < 1e-12);
        assert!((h.energies()[1] + PI * 100.0).abs() < 1e-12);
    }

    #[test]
    fn zz_pair_energies() {
        let j = TAU * 38.4;
        let sys = SpinSystem::with_offsets(&[("A", 0.0), ("B", 0.0)], &[("A", "B", j)]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        // σz σz / 4 eigenvalues, enumerated independently
        let q = TAU * 9.6;
        for (e, want) in h.energies().iter().zip([q, -q, -q, q]) {
            assert!((e - want).abs() < 1e-12);
        }
        // offsets alone put no spin near another, so the pair is flagged
        assert_eq!(h.warnings().len(), 1);
    }

    #[test]
    fn frames_subtract_offsets() {
        let sys = SpinSystem::two_propanol();
        let h = build_hamiltonian(&sys, &Frame::circuit(&sys).unwrap()).unwrap();
        assert!(h.omegas()[0].abs() < 1e-9);
        let dw = sys.larmor_rad_s(1) - sys.larmor_rad_s(0);
        assert!((h.omegas()[1] - dw).abs() < 1e-9);
        let r = build_hamiltonian(&sys, &Frame::receiver(&sys, 5.0).unwrap()).unwrap();
        assert!((r.omegas()[0] - 5.0).abs() < 1e-9);
        assert!(h.warnings().is_empty());
    }

    #[test]
    fn rejects_wrong_frame_length() {
        let sys = SpinSystem::two_propanol();
        assert!(build_hamiltonian(&sys, &Frame::new(vec![0.0])).is_err());
    }

    #[test]
    fn propagator_rejects_negative_time() {
        let sys = SpinSystem::with_offsets(&[("A", 1.0)], &[]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        assert!(h.free_propagator(-1e-3).is_err());
        assert!(h.free_propagator(0.0).unwrap().max_abs_diff(&Operator::identity(2)) == 0.0);
    }

    #[test]
    fn quantized_delay_is_near_ideal() {
        let sys = SpinSystem::two_propanol();
        let ideal = entangling_delay(&sys, EntanglingMode::Ideal).unwrap();
        let q = entangling_delay(&sys, EntanglingMode::Quantized).unwrap();
        assert!(q.periods.unwrap() >= 1);
        let dw = (sys.larmor_rad_s(1) - sys.larmor_rad_s(0)).abs();
        assert!((q.duration_s - ideal.duration_s).abs() <= 0.5 * TAU / dw + 1e-15);
        let wrapped = q.side_phase_rad.rem_euclid(TAU);
        assert!(wrapped < 1e-6 || TAU - wrapped < 1e-6);
    }
}
