use std::fmt;
use std::str::FromStr;

use super::{Degrees, Event, Millis, PulseProgram, PulseTarget, Stmt};
use crate::gates::wrap_angle;
use crate::hamiltonian::{entangling_delay, EntanglingMode};
use crate::noise::DecouplingMode;
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// Pulse phases (degrees) of one XY-8 cycle: X Y X Y Y X Y X.
pub const XY8_PHASES: [f64; 8] = [0.0, 90.0, 0.0, 90.0, 90.0, 0.0, 90.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Field phase on the center spin, spin echo on the sides.
    FieldOnCc,
    /// Field phase on the side spins, spin echo on the sides.
    FieldOnCs,
    /// Field phase on the center spin, one refocusing π on all carbons.
    EchoSense,
    /// Field phase on the center spin, XY-8 on all carbons while sensing.
    Xy8Sense,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::FieldOnCc, Builtin::FieldOnCs, Builtin::EchoSense, Builtin::Xy8Sense];

    pub fn as_str(self) -> &'static str {
        match self {
            Builtin::FieldOnCc => "field_on_cc",
            Builtin::FieldOnCs => "field_on_cs",
            Builtin::EchoSense => "echo_sense",
            Builtin::Xy8Sense => "xy8_sense",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown sequence `{s}` (field_on_cc|field_on_cs|echo_sense|xy8_sense)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinParams {
    pub theta_deg: f64,
    /// Echo length for the field sequences; XY-8 pulse spacing for
    /// `xy8_sense`.
    pub tau_ms: f64,
    /// XY-8 cycles (ignored by the field sequences).
    pub n_cycles: u32,
    pub entangling: EntanglingMode,
    pub decoupling: DecouplingMode,
    pub points: usize,
    pub dwell_ms: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            theta_deg: 0.0,
            tau_ms: 3.4,
            n_cycles: 1,
            entangling: EntanglingMode::Ideal,
            decoupling: DecouplingMode::Full,
            points: 4096,
            dwell_ms: 2.0,
        }
    }
}

fn pulse(target: PulseTarget, phi: f64, theta: f64) -> Event {
    Event::Pulse { target, phi: Degrees(phi), theta: Degrees(theta) }
}

fn zrot(target: PulseTarget, theta: f64) -> Event {
    Event::VirtualZ { target, theta: Degrees(theta) }
}

/// The pseudo-CNOT as program events:
/// `R_S(90°, 90°)`, the entangling delay, `R_S(0°, 90°)`, `Z_S(−90°)`,
/// `Z_C(−90°)`. In ideal mode the side-spin offset phase picked up during
/// the delay is undone by a `zrot` on the sides.
pub fn cnot_block(system: &SpinSystem, mode: EntanglingMode) -> Result<Vec<Event>> {
    let delay = entangling_delay(system, mode)?;
    let mut ev = vec![pulse(PulseTarget::Cs, 90.0, 90.0), Event::Delay(Millis::from_seconds(delay.duration_s))];
    if mode == EntanglingMode::Ideal {
        let undo = wrap_angle(-delay.side_phase_rad).to_degrees();
        if undo != 0.0 {
            ev.push(zrot(PulseTarget::Cs, undo));
        }
    }
    ev.extend([pulse(PulseTarget::Cs, 0.0, 90.0), zrot(PulseTarget::Cs, -90.0), zrot(PulseTarget::Cc, -90.0)]);
    Ok(ev)
}

fn xy8_cycle(spacing_ms: f64) -> Vec<Event> {
    let mut ev = vec![Event::Delay(Millis(spacing_ms / 2.0))];
    for (k, phi) in XY8_PHASES.iter().enumerate() {
        ev.push(pulse(PulseTarget::All, *phi, 180.0));
        let gap = if k + 1 == XY8_PHASES.len() { spacing_ms / 2.0 } else { spacing_ms };
        ev.push(Event::Delay(Millis(gap)));
    }
    ev
}

/// One of the shipped sensing sequences, in the circuit frame (center spin
/// on resonance).
pub fn builtin_sequence(system: &SpinSystem, which: Builtin, p: &BuiltinParams) -> Result<PulseProgram> {
    if !(p.tau_ms.is_finite() && p.tau_ms > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0 ms, got {}", p.tau_ms)));
    }
    if !p.theta_deg.is_finite() {
        return Err(Error::InvalidParameter("theta must be finite".into()));
    }
    if p.points < 2 || !(p.dwell_ms > 0.0) {
        return Err(Error::InvalidParameter("acquisition needs >= 2 points and dwell > 0".into()));
    }
    let cnot = cnot_block(system, p.entangling)?;
    let echo = [
        Event::Delay(Millis(p.tau_ms / 2.0)),
        pulse(PulseTarget::Cs, 0.0, 180.0),
        Event::Delay(Millis(p.tau_ms / 2.0)),
    ];
    let hadamard = pulse(PulseTarget::Cc, -90.0, 90.0);

    let mut ev = vec![Event::Decouple(p.decoupling), hadamard];
    match which {
        Builtin::FieldOnCc => {
            ev.push(zrot(PulseTarget::Cc, p.theta_deg));
            ev.extend(cnot.iter().cloned());
            ev.extend(echo);
        }
        Builtin::FieldOnCs => {
            ev.extend(cnot.iter().cloned());
            ev.extend(echo);
            // placed after the echo so the side spins carry +θ into the
            // second CNOT
            ev.push(zrot(PulseTarget::Cs, p.theta_deg));
        }
        Builtin::EchoSense => {
            ev.push(zrot(PulseTarget::Cc, p.theta_deg));
            ev.extend(cnot.iter().cloned());
            ev.extend([
                Event::Delay(Millis(p.tau_ms / 2.0)),
                pulse(PulseTarget::All, 0.0, 180.0),
                Event::Delay(Millis(p.tau_ms / 2.0)),
            ]);
        }
        Builtin::Xy8Sense => {
            if p.n_cycles < 1 {
                return Err(Error::InvalidParameter("xy8_sense needs at least one cycle".into()));
            }
            ev.push(zrot(PulseTarget::Cc, p.theta_deg));
            ev.extend(cnot.iter().cloned());
            let body = xy8_cycle(p.tau_ms).into_iter().map(Stmt::new).collect();
            ev.push(Event::Repeat { count: p.n_cycles, body });
        }
    }
    ev.extend(cnot);
    ev.push(Event::Acquire { points: p.points, dwell: Millis(p.dwell_ms) });
    Ok(PulseProgram::from_events(ev))
}

#[cfg(test)]
mod tests {
    use super::super::{expand, parse, print};
    use super::*;

    fn chain() -> SpinSystem {
        SpinSystem::two_propanol()
    }

    #[test]
    fn builtins_round_trip() {
        for which in Builtin::ALL {
            for mode in [EntanglingMode::Ideal, EntanglingMode::Quantized] {
                let p = BuiltinParams { theta_deg: 50.0, entangling: mode, n_cycles: 3, ..Default::default() };
                let prog = builtin_sequence(&chain(), which, &p).unwrap();
                assert_eq!(parse(&print(&prog)).unwrap(), prog, "{which}");
            }
        }
    }

    #[test]
    fn xy8_counts_and_duration() {
        let p = BuiltinParams { tau_ms: 0.43, n_cycles: 5, ..Default::default() };
        let prog = builtin_sequence(&chain(), Builtin::Xy8Sense, &p).unwrap();
        assert_eq!(prog.pulse_count(PulseTarget::All), 8 * 5);
        let cnot = entangling_delay(&chain(), EntanglingMode::Ideal).unwrap().duration_s;
        let sensing = prog.total_delay_s() - 2.0 * cnot;
        assert!((sensing - 5.0 * 8.0 * 0.43e-3).abs() < 1e-15);
        let e = expand(&prog);
        assert!((e.total_duration_s - prog.total_delay_s()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tau() {
        let p = BuiltinParams { tau_ms: 0.0, ..Default::default() };
        assert!(builtin_sequence(&chain(), Builtin::FieldOnCc, &p).is_err());
        assert_eq!("xy8_sense".parse::<Builtin>().unwrap(), Builtin::Xy8Sense);
        assert!("echo".parse::<Builtin>().is_err());
    }
}
