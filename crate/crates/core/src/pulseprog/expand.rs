use super::{Degrees, Event, PulseProgram, PulseTarget, Stmt};
use crate::gates::{wrap_angle, PhaseFrame};

/// A repeat-free program whose pulses already carry the virtual-Z frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedProgram {
    pub program: PulseProgram,
    pub total_duration_s: f64,
}

const FRAME_TOL: f64 = 1e-12;

struct Expander {
    frame: PhaseFrame,
    out: Vec<Stmt>,
    duration: f64,
}

impl Expander {
    fn phi(&self, group: &str, phi: Degrees) -> Degrees {
        Degrees::from_radians(wrap_angle(self.frame.shifted_phi(group, phi.radians())))
    }

    fn frames_agree(&self) -> bool {
        (wrap_angle(self.frame.angle("CC") - self.frame.angle("CS"))).abs() <= FRAME_TOL
    }

    fn push(&mut self, event: Event, from: &Stmt) {
        self.out.push(Stmt { event, span: from.span });
    }

    fn walk(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match &s.event {
                Event::Pulse { target, phi, theta } => {
                    let split = *target == PulseTarget::All && !self.frames_agree();
                    if split {
                        for (t, g) in [(PulseTarget::Cc, "CC"), (PulseTarget::Cs, "CS")] {
                            let e = Event::Pulse { target: t, phi: self.phi(g, *phi), theta: *theta };
                            self.push(e, s);
                        }
                    } else {
                        let group = target.groups()[0];
                        let e = Event::Pulse { target: *target, phi: self.phi(group, *phi), theta: *theta };
                        self.push(e, s);
                    }
                }
                Event::VirtualZ { target, theta } => {
                    self.frame = self.frame.virtual_z(target.groups().iter().copied(), theta.radians());
                }
                Event::Delay(ms) => {
                    self.duration += ms.seconds();
                    self.push(s.event.clone(), s);
                }
                Event::Decouple(_) => self.push(s.event.clone(), s),
                Event::Repeat { count, body } => {
                    for _ in 0..*count {
                        self.walk(body);
                    }
                }
                Event::Acquire { .. } => {
                    self.flush_frame(s);
                    self.push(s.event.clone(), s);
                }
            }
        }
    }

    /// Z rotations that were folded into pulse phases still act on the
    /// state; emit what is left of them before the readout.
    fn flush_frame(&mut self, at: &Stmt) {
        let cc = self.frame.angle("CC");
        let cs = self.frame.angle("CS");
        if self.frames_agree() {
            if cc.abs() > FRAME_TOL {
                self.push(Event::VirtualZ { target: PulseTarget::All, theta: Degrees::from_radians(cc) }, at);
            }
        } else {
            for (t, a) in [(PulseTarget::Cc, cc), (PulseTarget::Cs, cs)] {
                if a.abs() > FRAME_TOL {
                    self.push(Event::VirtualZ { target: t, theta: Degrees::from_radians(a) }, at);
                }
            }
        }
        self.frame = PhaseFrame::new();
    }
}

/// Unrolls repeats and folds virtual Z rotations into later pulse phases.
///
/// `zrot` followed by a pulse at phase `φ` becomes the pulse at `φ − θ`
/// with the Z moved past it. Z rotations commute with free evolution and
/// with the flip-flop noise, so they accumulate until the readout, where
/// the residual is emitted as explicit `zrot` events. An `ALL` pulse is
/// split when the center and side frames differ.
pub fn expand(program: &PulseProgram) -> ExpandedProgram {
    let mut ex = Expander { frame: PhaseFrame::new(), out: Vec::new(), duration: 0.0 };
    ex.walk(&program.stmts);
    ExpandedProgram { program: PulseProgram { stmts: ex.out }, total_duration_s: ex.duration }
}
