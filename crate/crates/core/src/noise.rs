//! Controlled environment: sample calibration, structural decoupling and
//! the Strang-split flip-flop evolution engine.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::hamiltonian::DiagonalHamiltonian;
use crate::spin::{DensityMatrix, SpinSystem, C0};
use crate::{Error, Result};

/// Upper bound on `dt · max Γ` accepted by the integrator.
pub const STEP_GUARD: f64 = 0.05;
/// Default largest step used when a duration is split into steps.
pub const DEFAULT_MAX_DT: f64 = 4e-5;

const PRESETS: [&str; 4] = [
    include_str!("../presets/sample1.toml"),
    include_str!("../presets/sample2.toml"),
    include_str!("../presets/sample3.toml"),
    include_str!("../presets/sample4.toml"),
];

/// Measured relaxation constants of one doped sample.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub name: String,
    pub impurity_concentration_mm: f64,
    pub t1_cc_s: f64,
    pub t2_full_s: f64,
    pub t2_selective_s: f64,
    pub t1_hss_s: f64,
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("impurity_concentration_mm", self.impurity_concentration_mm),
            ("t1_cc_s", self.t1_cc_s),
            ("t2_full_s", self.t2_full_s),
            ("t2_selective_s", self.t2_selective_s),
            ("t1_hss_s", self.t1_hss_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("sample field `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: SampleSpec = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Shipped preset 1..=4.
    pub fn preset(index: usize) -> Result<Self> {
        let text = index
            .checked_sub(1)
            .and_then(|i| PRESETS.get(i))
            .ok_or_else(|| Error::Config(format!("no sample preset {index} (expected 1-4)")))?;
        Self::from_toml_str(text)
    }

    /// Looks up a preset by `1`, `sample1` or `Sample 1`.
    pub fn preset_named(name: &str) -> Result<Self> {
        let digits: String = name.chars().filter(|c| c.is_ascii_digit()).collect();
        let prefix: String = name.chars().filter(|c| c.is_ascii_alphabetic()).collect();
        if !(prefix.is_empty() || prefix.eq_ignore_ascii_case("sample")) {
            return Err(Error::Config(format!("unknown sample preset `{name}`")));
        }
        let idx = digits.parse().map_err(|_| Error::Config(format!("unknown sample preset `{name}`")))?;
        Self::preset(idx)
    }

    pub fn presets() -> Vec<SampleSpec> {
        (1..=PRESETS.len()).map(|i| Self::preset(i).expect("shipped presets are valid")).collect()
    }

    /// The same sample at a different impurity concentration. Relaxation
    /// times scale as `1 / C_m`, so every rate scales linearly.
    pub fn with_concentration(&self, concentration_mm: f64) -> Result<Self> {
        if !(concentration_mm.is_finite() && concentration_mm > 0.0) {
            return Err(Error::Config(format!("concentration must be positive, got {concentration_mm}")));
        }
        let k = self.impurity_concentration_mm / concentration_mm;
        Ok(SampleSpec {
            name: format!("{} @ {concentration_mm} mM", self.name),
            impurity_concentration_mm: concentration_mm,
            t1_cc_s: self.t1_cc_s * k,
            t2_full_s: self.t2_full_s * k,
            t2_selective_s: self.t2_selective_s * k,
            t1_hss_s: self.t1_hss_s * k,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecouplingMode {
    #[default]
    None,
    Selective,
    Full,
}

impl DecouplingMode {
    pub const ALL: [DecouplingMode; 3] = [DecouplingMode::None, DecouplingMode::Selective, DecouplingMode::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            DecouplingMode::None => "none",
            DecouplingMode::Selective => "selective",
            DecouplingMode::Full => "full",
        }
    }

    /// Labels this mode removes from `system`.
    pub fn removed(self, system: &SpinSystem) -> Vec<String> {
        system
            .spins()
            .iter()
            .filter(|s| match self {
                DecouplingMode::None => false,
                DecouplingMode::Selective => s.name == "HC",
                DecouplingMode::Full => is_proton(&s.name, &s.species),
            })
            .map(|s| s.name.clone())
            .collect()
    }
}

impl fmt::Display for DecouplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DecouplingMode::None),
            "selective" => Ok(DecouplingMode::Selective),
            "full" => Ok(DecouplingMode::Full),
            _ => Err(Error::Config(format!("unknown decoupling mode `{s}` (none|selective|full)"))),
        }
    }
}

fn is_proton(name: &str, species: &str) -> bool {
    species == "1H" || name.starts_with('H')
}

fn is_carbon(name: &str, species: &str) -> bool {
    species == "13C" || name.starts_with('C')
}

/// The register left after decoupling: decoupled spins are removed along
/// with every coupling they had.
pub fn apply_decoupling(system: &SpinSystem, mode: DecouplingMode) -> Result<SpinSystem> {
    let removed = mode.removed(system);
    let keep: Vec<String> = system.labels().into_iter().filter(|l| !removed.contains(l)).collect();
    let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
    system.subsystem(&keep)
}

/// Per-spin Markovian flip rates for a register.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    labels: Vec<String>,
    rates: Vec<f64>,
    decoupling: DecouplingMode,
}

impl NoiseSpec {
    pub fn new(labels: Vec<String>, rates: Vec<f64>, decoupling: DecouplingMode) -> Result<Self> {
        if labels.len() != rates.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: rates.len() });
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidParameter(format!("flip rate must be >= 0, got {r}")));
        }
        Ok(NoiseSpec { labels, rates, decoupling })
    }

    /// No noise on any spin of `system`.
    pub fn silent(system: &SpinSystem) -> Self {
        NoiseSpec { labels: system.labels(), rates: vec![0.0; system.len()], decoupling: DecouplingMode::None }
    }

    pub fn uniform(system: &SpinSystem, rate: f64) -> Result<Self> {
        Self::new(system.labels(), vec![rate; system.len()], DecouplingMode::None)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn decoupling(&self) -> DecouplingMode {
        self.decoupling
    }

    pub fn with_decoupling(mut self, mode: DecouplingMode) -> Self {
        self.decoupling = mode;
        self
    }

    pub fn rate(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.rates[i])
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Rates re-ordered to match `labels`. Spins without an entry are an
    /// error.
    pub fn rates_for(&self, labels: &[String]) -> Result<Vec<f64>> {
        labels
            .iter()
            .map(|l| self.rate(l).ok_or_else(|| Error::UnknownSpin(l.clone())))
            .collect()
    }

    /// Restriction to the spins of `system`.
    pub fn restrict(&self, system: &SpinSystem) -> Result<NoiseSpec> {
        let labels = system.labels();
        let rates = self.rates_for(&labels)?;
        Ok(NoiseSpec { labels, rates, decoupling: self.decoupling })
    }
}

/// Flip rates from a sample: carbons relax at `1/T1(CC)`, protons at
/// `1/T1(HSs)`. Spins of other species are noiseless.
pub fn calibrate_rates(sample: &SampleSpec, system: &SpinSystem) -> Result<NoiseSpec> {
    sample.validate()?;
    let rates = system
        .spins()
        .iter()
        .map(|s| {
            if is_proton(&s.name, &s.species) {
                1.0 / sample.t1_hss_s
            } else if is_carbon(&s.name, &s.species) {
                1.0 / sample.t1_cc_s
            } else {
                0.0
            }
        })
        .collect();
    NoiseSpec::new(system.labels(), rates, DecouplingMode::None)
}

/// Decoupled register together with its calibrated noise.
pub fn noisy_register(
    system: &SpinSystem,
    sample: &SampleSpec,
    mode: DecouplingMode,
) -> Result<(SpinSystem, NoiseSpec)> {
    let reg = apply_decoupling(system, mode)?;
    let noise = calibrate_rates(sample, &reg)?.with_decoupling(mode);
    Ok((reg, noise))
}

/// Coefficients of the exact infinite-temperature flip-flop map over `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipChannel {
    pub rate: f64,
    pub dt: f64,
    /// Weight kept by a population.
    pub keep: f64,
    /// Weight moved to the flipped population.
    pub flip: f64,
    /// Coherence damping factor.
    pub damp: f64,
}

impl FlipChannel {
    pub fn new(rate: f64, dt: f64) -> Self {
        let e = (-rate * dt).exp();
        FlipChannel { rate, dt, keep: (1.0 + e) / 2.0, flip: (1.0 - e) / 2.0, damp: (-rate * dt / 2.0).exp() }
    }

    pub fn is_identity(&self) -> bool {
        self.flip == 0.0 && self.damp == 1.0
    }

    /// Kraus operators `√p_I·I, √q·X, √q·Y, √p_Z·Z`.
    pub fn kraus(&self) -> [Matrix2<Complex64>; 4] {
        let q = self.flip / 2.0;
        let p_i = (self.keep + self.damp) / 2.0;
        let p_z = ((self.keep - self.damp) / 2.0).max(0.0);
        let r = |x: f64| Complex64::new(x.sqrt(), 0.0);
        let i = Complex64::new(0.0, 1.0);
        [
            Matrix2::new(r(p_i), C0, C0, r(p_i)),
            Matrix2::new(C0, r(q), r(q), C0),
            Matrix2::new(C0, -i * r(q), i * r(q), C0),
            Matrix2::new(r(p_z), C0, C0, -r(p_z)),
        ]
    }

    /// Applies the channel to spin `index` of `rho` in place.
    pub(crate) fn apply(&self, rho: &mut DensityMatrix, index: usize) {
        let n = rho.n_spins();
        let d = rho.dim();
        let m = 1usize << (n - 1 - index);
        let (keep, flip, damp) = (self.keep, self.flip, self.damp);
        let data = rho.matrix_mut().as_mut_slice();
        for base_b in (0..d).step_by(2 * m) {
            for b in base_b..base_b + m {
                let (lo, hi) = data.split_at_mut((b | m) * d);
                let c0 = &mut lo[b * d..b * d + d];
                let c1 = &mut hi[..d];
                for base_a in (0..d).step_by(2 * m) {
                    for a in base_a..base_a + m {
                        let x00 = c0[a];
                        let x11 = c1[a | m];
                        c0[a] = x00 * keep + x11 * flip;
                        c1[a | m] = x00 * flip + x11 * keep;
                        c0[a | m] *= damp;
                        c1[a] *= damp;
                    }
                }
            }
        }
    }
}

/// Running Hermiticity / trace / positivity checks on an evolving state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMonitor {
    pub every: usize,
    pub tol: f64,
    pub floor: f64,
    pub checks: usize,
    pub worst_hermiticity: f64,
    pub worst_trace: f64,
    counter: usize,
}

impl Default for ValidityMonitor {
    fn default() -> Self {
        ValidityMonitor::new(10, 1e-10, crate::spin::EIGEN_FLOOR)
    }
}

impl ValidityMonitor {
    pub fn new(every: usize, tol: f64, floor: f64) -> Self {
        ValidityMonitor {
            every: every.max(1),
            tol,
            floor,
            checks: 0,
            worst_hermiticity: 0.0,
            worst_trace: 0.0,
            counter: 0,
        }
    }

    /// Counts one step; validates on every `every`-th call.
    pub fn tick(&mut self, rho: &DensityMatrix) -> Result<()> {
        self.counter += 1;
        if self.counter % self.every == 0 {
            self.check(rho)?;
        }
        Ok(())
    }

    pub fn check(&mut self, rho: &DensityMatrix) -> Result<()> {
        self.checks += 1;
        self.worst_hermiticity = self.worst_hermiticity.max(rho.hermiticity_error());
        self.worst_trace = self.worst_trace.max(rho.trace_error());
        rho.validate(self.tol, self.floor)
    }

    /// Folds another monitor's statistics into this one.
    pub fn absorb(&mut self, other: &ValidityMonitor) {
        self.checks += other.checks;
        self.worst_hermiticity = self.worst_hermiticity.max(other.worst_hermiticity);
        self.worst_trace = self.worst_trace.max(other.worst_trace);
    }
}

/// Fixed-step Strang integrator: half phase, channels, half phase.
#[derive(Debug, Clone)]
pub struct Evolver {
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    channels: Vec<(usize, FlipChannel)>,
}

impl Evolver {
    pub fn new(h: &DiagonalHamiltonian, rates: &[f64], dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if rates.len() != h.n_spins() {
            return Err(Error::DimensionMismatch { expected: h.n_spins(), found: rates.len() });
        }
        let max_rate = rates.iter().copied().fold(0.0, f64::max);
        if dt * max_rate > STEP_GUARD {
            return Err(Error::StepSizeGuard { dt, rate: max_rate, limit: STEP_GUARD });
        }
        let channels = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| (i, FlipChannel::new(r, dt)))
            .filter(|(_, c)| !c.is_identity())
            .collect();
        Ok(Evolver { dt, half: h.phases(dt / 2.0), full: h.phases(dt), channels })
    }

    /// Evolver for a register whose noise is given by label.
    pub fn for_state(h: &DiagonalHamiltonian, noise: &NoiseSpec, rho: &DensityMatrix, dt: f64) -> Result<Self> {
        if rho.dim() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: rho.dim() });
        }
        Self::new(h, &noise.rates_for(rho.labels())?, dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels.is_empty()
    }

    fn apply_channels(&self, rho: &mut DensityMatrix) {
        for (i, c) in &self.channels {
            c.apply(rho, *i);
        }
    }

    /// One full Strang step.
    pub fn step(&self, rho: &mut DensityMatrix) {
        rho.apply_diagonal(&self.half);
        self.apply_channels(rho);
        rho.apply_diagonal(&self.half);
    }

    /// `steps` Strang steps with adjacent half phases merged. The monitor
    /// sees the state after every step's channel pass (which differs from
    /// the step endpoint by a unitary phase only).
    pub fn run(&self, rho: &mut DensityMatrix, steps: usize, mut monitor: Option<&mut ValidityMonitor>) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        if self.channels.is_empty() {
            // the diagonal phases commute, so the whole run is one phase
            let total: Vec<Complex64> = self.full.iter().map(|u| u.powu(steps as u32)).collect();
            rho.apply_diagonal(&total);
            if let Some(m) = monitor.as_deref_mut() {
                for _ in 0..steps {
                    m.tick(rho)?;
                }
            }
            return Ok(());
        }
        rho.apply_diagonal(&self.half);
        for k in 0..steps {
            self.apply_channels(rho);
            if let Some(m) = monitor.as_deref_mut() {
                m.tick(rho)?;
            }
            rho.apply_diagonal(if k + 1 == steps { &self.half } else { &self.full });
        }
        Ok(())
    }
}

/// Number of equal steps of at most `max_dt` covering `duration`.
pub fn step_count(duration: f64, max_dt: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        (duration / max_dt).ceil().max(1.0) as usize
    }
}

/// Evolves `rho` for `duration` seconds in equal steps no longer than
/// `max_dt`.
pub fn evolve_for(
    rho: &mut DensityMatrix,
    h: &DiagonalHamiltonian,
    noise: &NoiseSpec,
    duration: f64,
    max_dt: f64,
    monitor: Option<&mut ValidityMonitor>,
) -> Result<()> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be >= 0, got {duration}")));
    }
    let steps = step_count(duration, max_dt);
    if steps == 0 {
        return Ok(());
    }
    let ev = Evolver::for_state(h, noise, rho, duration / steps as f64)?;
    ev.run(rho, steps, monitor)
}

/// Trajectory of `steps + 1` states starting at `rho`.
pub fn evolve(
    rho: &DensityMatrix,
    h: &DiagonalHamiltonian,
    noise: &NoiseSpec,
    dt: f64,
    steps: usize,
) -> Result<Vec<DensityMatrix>> {
    let ev = Evolver::for_state(h, noise, rho, dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut cur = rho.clone();
    out.push(cur.clone());
    for _ in 0..steps {
        ev.step(&mut cur);
        cur.check_hermitian_trace(1e-10, 1e-10)?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, Frame};
    use crate::spin::{pauli, PauliAxis, C1};

    #[test]
    fn sample_presets_match_table() {
        let s1 = SampleSpec::preset(1).unwrap();
        assert_eq!(s1.impurity_concentration_mm, 12.0);
        let sys = SpinSystem::two_propanol();
        let n = calibrate_rates(&s1, &sys).unwrap();
        assert!((n.rate("HS1").unwrap() - 1.0 / 0.093).abs() < 1e-12);
        assert!((n.rate("HC").unwrap() - 1.0 / 0.093).abs() < 1e-12);
        assert!((n.rate("CC").unwrap() - 1.0 / 1.3).abs() < 1e-12);
        assert_eq!(n.rate("CS2"), n.rate("CC"));
        let s4 = SampleSpec::preset_named("sample4").unwrap();
        let n4 = calibrate_rates(&s4, &sys).unwrap();
        assert!((n4.rate("HS6").unwrap() - 1.0 / 0.017).abs() < 1e-12);
        assert!(SampleSpec::preset(5).is_err());
        assert!(SampleSpec::preset_named("bogus").is_err());
    }

    #[test]
    fn doubling_concentration_doubles_rates() {
        let sys = SpinSystem::two_propanol();
        let s = SampleSpec::preset(2).unwrap();
        let d = s.with_concentration(2.0 * s.impurity_concentration_mm).unwrap();
        let (a, b) = (calibrate_rates(&s, &sys).unwrap(), calibrate_rates(&d, &sys).unwrap());
        for (x, y) in a.rates().iter().zip(b.rates()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn invalid_sample_rejected() {
        let text = "name = \"x\"\nimpurity_concentration_mm = 1.0\nt1_cc_s = -1.0\nt2_full_s = 1.0\nt2_selective_s = 1.0\nt1_hss_s = 1.0\n";
        assert!(SampleSpec::from_toml_str(text).is_err());
    }

    #[test]
    fn decoupling_registers() {
        let sys = SpinSystem::two_propanol();
        let full = apply_decoupling(&sys, DecouplingMode::Full).unwrap();
        assert_eq!(full.labels(), ["CC", "CS1", "CS2"]);
        assert_eq!(full.dim(), 8);
        assert_eq!(apply_decoupling(&sys, DecouplingMode::Selective).unwrap().dim(), 512);
        assert_eq!(apply_decoupling(&sys, DecouplingMode::None).unwrap().dim(), 1024);
        assert_eq!("selective".parse::<DecouplingMode>().unwrap(), DecouplingMode::Selective);
        assert!("partial".parse::<DecouplingMode>().is_err());
    }

    #[test]
    fn kraus_is_trace_preserving() {
        for (rate, dt) in [(0.0, 1e-3), (10.8, 1e-4), (58.8, 8e-4), (1e3, 1.0)] {
            let ch = FlipChannel::new(rate, dt);
            let sum: Matrix2<Complex64> = ch.kraus().iter().map(|k| k.adjoint() * k).sum();
            let err = (sum - pauli(PauliAxis::I)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "rate {rate}: {err}");
        }
    }

    #[test]
    fn fast_channel_matches_kraus_sum() {
        let sys = SpinSystem::with_offsets(&[("A", 0.0), ("B", 0.0)], &[]).unwrap();
        // an arbitrary valid two-spin state
        let a = Matrix2::new(
            Complex64::new(0.6, 0.0),
            Complex64::new(0.2, 0.1),
            Complex64::new(0.2, -0.1),
            Complex64::new(0.4, 0.0),
        );
        let b = Matrix2::new(
            Complex64::new(0.3, 0.0),
            Complex64::new(-0.1, 0.3),
            Complex64::new(-0.1, -0.3),
            Complex64::new(0.7, 0.0),
        );
        let rho = DensityMatrix::product(sys.labels(), &[a, b]).unwrap();
        let ch = FlipChannel::new(7.0, 0.01);
        for index in 0..2 {
            let mut fast = rho.clone();
            ch.apply(&mut fast, index);
            let mut slow = crate::spin::CMatrix::zeros(4, 4);
            for k in ch.kraus() {
                let big = crate::spin::embed_single(2, index, &k);
                slow += &big * rho.matrix() * big.adjoint();
            }
            let err = (fast.matrix() - slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-15);
        }
    }

    #[test]
    fn guard_rejects_large_steps() {
        let sys = SpinSystem::with_offsets(&[("A", 0.0)], &[]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        assert!(matches!(Evolver::new(&h, &[100.0], 1e-3), Err(Error::StepSizeGuard { .. })));
        assert!(Evolver::new(&h, &[50.0], 1e-3).is_ok());
        assert!(Evolver::new(&h, &[1.0, 2.0], 1e-3).is_err());
        assert!(Evolver::new(&h, &[1.0], 0.0).is_err());
    }

    #[test]
    fn noiseless_run_is_free_precession() {
        let sys = SpinSystem::with_offsets(&[("A", 3.0), ("B", -2.0)], &[("A", "B", 5.0)]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        let half = Complex64::new(0.5, 0.0);
        let plus = Matrix2::new(half, half, half, half);
        let rho0 = DensityMatrix::product(sys.labels(), &[plus, plus]).unwrap();
        let mut rho = rho0.clone();
        Evolver::new(&h, &[0.0, 0.0], 1e-3).unwrap().run(&mut rho, 250, None).unwrap();
        let u = h.free_propagator(0.25).unwrap();
        let want = crate::gates::apply_unitary(&rho0, &u).unwrap();
        assert!(rho.max_abs_diff(&want) < 1e-13);
        assert_eq!(rho.trace(), C1 * rho.trace().re);
    }

    #[test]
    fn merged_run_equals_repeated_steps() {
        let sys = SpinSystem::with_offsets(&[("A", 30.0), ("B", -20.0)], &[("A", "B", 50.0)]).unwrap();
        let h = build_hamiltonian(&sys, &Frame::lab(&sys)).unwrap();
        let rho0 = crate::spin::prepare_rho_i(
            &SpinSystem::with_offsets(&[("CC", 30.0), ("CS1", -20.0), ("CS2", 0.0)], &[]).unwrap(),
        )
        .unwrap()
        .partial_trace(&["CC", "CS1"])
        .unwrap();
        let rho0 = DensityMatrix::new(sys.labels(), rho0.into_matrix()).unwrap();
        let ev = Evolver::new(&h, &[3.0, 9.0], 1e-3).unwrap();
        let mut a = rho0.clone();
        for _ in 0..40 {
            ev.step(&mut a);
        }
        let mut b = rho0;
        let mut mon = ValidityMonitor::default();
        ev.run(&mut b, 40, Some(&mut mon)).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
        assert_eq!(mon.checks, 4);
    }
}
