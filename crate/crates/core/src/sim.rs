//! Runs a pulse program on a spin register.
//!
//! Pulses are instantaneous. Delays evolve the state under the secular
//! Hamiltonian and the calibrated flip-flop noise. `decouple` removes spins
//! from the register (tracing them out); leading `decouple` statements pick
//! the register the initial state is prepared on. Gate events run in the
//! circuit frame with CC on resonance; the readout switches to the
//! receiver frame.

use crate::acquisition::{acquire_fid, Fid};
use crate::gates::{rotation_matrix, z_matrix};
use crate::hamiltonian::{build_hamiltonian, DiagonalHamiltonian, Frame};
use crate::noise::{apply_decoupling, calibrate_rates, evolve_for, DecouplingMode, NoiseSpec, SampleSpec, ValidityMonitor, DEFAULT_MAX_DT};
use crate::pulseprog::{Event, PulseProgram, Stmt};
use crate::spin::{prepare_rho_i, thermal_state, DensityMatrix, SpinSystem, DEFAULT_EPSILON};
use crate::{Error, Result};

/// Observed spin.
pub const OBSERVED: &str = "CC";

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Thermal state in its observable-equivalent form: CC polarized,
    /// everything else fully mixed.
    Thermal,
    /// `|+⟩⟨+|` on CC with the sides in the `|01⟩, |10⟩` mixture.
    RhoI,
    /// A given state; its labels must match the initial register.
    Custom(DensityMatrix),
}

impl std::str::FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thermal" => Ok(InitialState::Thermal),
            "rho_i" => Ok(InitialState::RhoI),
            _ => Err(Error::Config(format!("unknown initial state `{s}` (thermal|rho_i)"))),
        }
    }
}

pub fn prepare_initial(system: &SpinSystem, initial: &InitialState) -> Result<DensityMatrix> {
    match initial {
        InitialState::Thermal => thermal_state(system, DEFAULT_EPSILON)?.observable_equivalent(OBSERVED),
        InitialState::RhoI => prepare_rho_i(system),
        InitialState::Custom(rho) => {
            if rho.labels() != system.labels().as_slice() {
                return Err(Error::Register(format!(
                    "initial state is on {:?} but the register is {:?}",
                    rho.labels(),
                    system.labels()
                )));
            }
            Ok(rho.clone())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub molecule: SpinSystem,
    /// `None` runs noiseless.
    pub sample: Option<SampleSpec>,
    /// CC offset in the receiver frame, rad/s.
    pub receiver_offset: f64,
    pub max_dt: f64,
    /// Validity spot-check interval in evolution steps.
    pub check_every: usize,
    /// When false, `acquire` records only the first sample.
    pub record_fid: bool,
}

impl SimConfig {
    pub fn new(molecule: SpinSystem) -> Self {
        SimConfig {
            molecule,
            sample: None,
            receiver_offset: std::f64::consts::TAU * 100.0,
            max_dt: DEFAULT_MAX_DT,
            check_every: 10,
            record_fid: true,
        }
    }

    pub fn with_sample(mut self, sample: SampleSpec) -> Self {
        self.sample = Some(sample);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Register at the time of acquisition.
    pub register: SpinSystem,
    /// State right before the readout.
    pub final_state: DensityMatrix,
    /// `Tr[(σx + iσy)_CC ρ]` at the start of the readout.
    pub first_sample: num_complex::Complex64,
    pub fid: Option<Fid>,
    pub monitor: ValidityMonitor,
}

struct Machine<'a> {
    cfg: &'a SimConfig,
    register: SpinSystem,
    noise: NoiseSpec,
    h: DiagonalHamiltonian,
    rho: DensityMatrix,
    monitor: ValidityMonitor,
    output: Option<RunOutput>,
}

fn register_noise(cfg: &SimConfig, register: &SpinSystem) -> Result<NoiseSpec> {
    match &cfg.sample {
        Some(s) => calibrate_rates(s, register),
        None => Ok(NoiseSpec::silent(register)),
    }
}

/// The register selected by the program's leading `decouple` statements.
pub fn initial_register(molecule: &SpinSystem, program: &PulseProgram) -> Result<SpinSystem> {
    let mut mode = DecouplingMode::None;
    for s in &program.stmts {
        match s.event {
            Event::Decouple(m) => mode = m,
            _ => break,
        }
    }
    apply_decoupling(molecule, mode)
}

impl<'a> Machine<'a> {
    fn set_register(&mut self, register: SpinSystem) -> Result<()> {
        self.noise = register_noise(self.cfg, &register)?;
        self.h = build_hamiltonian(&register, &Frame::circuit(&register)?)?;
        self.register = register;
        Ok(())
    }

    fn decouple(&mut self, mode: DecouplingMode, stmt: &Stmt) -> Result<()> {
        let removed = mode.removed(&self.cfg.molecule);
        let absent: Vec<String> =
            self.cfg.molecule.labels().into_iter().filter(|l| !self.register.contains(l)).collect();
        if let Some(l) = absent.iter().find(|l| !removed.contains(l)) {
            return Err(Error::Register(format!(
                "line {}: `decouple {mode}` would re-couple `{l}`, which is no longer simulated",
                stmt.span.line
            )));
        }
        let keep: Vec<String> = self.register.labels().into_iter().filter(|l| !removed.contains(l)).collect();
        if keep.len() == self.register.len() {
            return Ok(());
        }
        let keep_ref: Vec<&str> = keep.iter().map(String::as_str).collect();
        self.rho = self.rho.partial_trace(&keep_ref)?;
        self.set_register(apply_decoupling(&self.register, mode)?)
    }

    fn run(&mut self, stmts: &[Stmt]) -> Result<()> {
        for s in stmts {
            if self.output.is_some() {
                break;
            }
            match &s.event {
                Event::Pulse { target, phi, theta } => {
                    let u = rotation_matrix(phi.radians(), theta.radians());
                    for i in target.to_target().resolve(&self.register)? {
                        self.rho.apply_single(i, &u);
                    }
                }
                Event::VirtualZ { target, theta } => {
                    let u = z_matrix(theta.radians());
                    for i in target.to_target().resolve(&self.register)? {
                        self.rho.apply_single(i, &u);
                    }
                }
                Event::Delay(ms) => {
                    evolve_for(&mut self.rho, &self.h, &self.noise, ms.seconds(), self.cfg.max_dt, Some(&mut self.monitor))?;
                }
                Event::Decouple(mode) => self.decouple(*mode, s)?,
                Event::Repeat { count, body } => {
                    for _ in 0..*count {
                        self.run(body)?;
                    }
                }
                Event::Acquire { points, dwell } => self.acquire(*points, dwell.seconds())?,
            }
        }
        Ok(())
    }

    fn acquire(&mut self, points: usize, dwell_s: f64) -> Result<()> {
        self.monitor.check(&self.rho)?;
        let idx = self.rho.index_of(OBSERVED)?;
        let final_state = self.rho.clone();
        let first_sample = final_state.transverse(idx);
        let fid = if self.cfg.record_fid {
            let frame = Frame::receiver(&self.register, self.cfg.receiver_offset)?;
            let h = build_hamiltonian(&self.register, &frame)?;
            let mut rho = self.rho.clone();
            let fid = acquire_fid(&mut rho, OBSERVED, &h, &self.noise, points, dwell_s, self.cfg.max_dt, Some(&mut self.monitor))?;
            self.monitor.check(&rho)?;
            Some(fid)
        } else {
            None
        };
        self.output = Some(RunOutput {
            register: self.register.clone(),
            final_state,
            first_sample,
            fid,
            monitor: self.monitor.clone(),
        });
        Ok(())
    }
}

/// Executes `program` from `initial`.
pub fn run_program(program: &PulseProgram, cfg: &SimConfig, initial: &InitialState) -> Result<RunOutput> {
    if !(cfg.max_dt > 0.0) {
        return Err(Error::InvalidParameter("max_dt must be > 0".into()));
    }
    let register = initial_register(&cfg.molecule, program)?;
    register.require(&[OBSERVED])?;
    let rho = prepare_initial(&register, initial)?;
    let mut m = Machine {
        cfg,
        noise: register_noise(cfg, &register)?,
        h: build_hamiltonian(&register, &Frame::circuit(&register)?)?,
        register,
        rho,
        monitor: ValidityMonitor::new(cfg.check_every, 1e-10, crate::spin::EIGEN_FLOOR),
        output: None,
    };
    m.monitor.check(&m.rho)?;
    m.run(&program.stmts)?;
    m.output.ok_or_else(|| Error::InvalidParameter("program has no acquire".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulseprog::parse;

    #[test]
    fn leading_decouple_picks_register() {
        let mol = SpinSystem::two_propanol();
        let p = parse("decouple selective\npulse CC 0 90\nacquire 8 1").unwrap();
        assert_eq!(initial_register(&mol, &p).unwrap().dim(), 512);
        let p = parse("pulse CC 0 90\ndecouple full\nacquire 8 1").unwrap();
        assert_eq!(initial_register(&mol, &p).unwrap().len(), 10);
    }

    #[test]
    fn recoupling_is_rejected() {
        let mol = SpinSystem::two_propanol();
        let p = parse("decouple full\ndelay 1\ndecouple none\nacquire 8 1").unwrap();
        let cfg = SimConfig::new(mol);
        assert!(matches!(run_program(&p, &cfg, &InitialState::Thermal), Err(Error::Register(_))));
    }

    #[test]
    fn ninety_pulse_gives_signal() {
        let mol = SpinSystem::two_propanol();
        let p = parse("decouple full\npulse CC 90 90\nacquire 16 1").unwrap();
        let out = run_program(&p, &SimConfig::new(mol), &InitialState::Thermal).unwrap();
        // R(90°, 90°) tips +z to +x
        assert!((out.first_sample - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(out.fid.unwrap().len(), 16);
    }

    #[test]
    fn mid_program_decouple_traces_out() {
        let mol = SpinSystem::two_propanol();
        let p = parse("decouple selective\npulse CC 90 90\ndelay 1\ndecouple full\nacquire 4 1").unwrap();
        let out = run_program(&p, &SimConfig::new(mol), &InitialState::Thermal).unwrap();
        assert_eq!(out.register.len(), 3);
        out.final_state.validate(1e-12, -1e-12).unwrap();
    }
}
