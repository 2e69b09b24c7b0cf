//! The pulse-program language.
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! decouple full
//! pulse CC -90 90        # pulse <CC|CS|ALL> <phi_deg> <theta_deg>
//! zrot CC 50             # virtual Z, degrees
//! delay 1.72             # milliseconds
//! repeat 4 {
//!   pulse ALL 0 180
//! }
//! acquire 4096 2         # acquire <points> <dwell_ms>
//! ```
//!
//! A program ends with exactly one top-level `acquire`.

mod builtins;
mod diagnostics;
mod expand;
mod parser;
mod printer;

use std::fmt;

use crate::gates::Target;
use crate::noise::DecouplingMode;

pub use builtins::{builtin_sequence, cnot_block, Builtin, BuiltinParams, XY8_PHASES};
pub use diagnostics::{Diagnostics, ParseDiagnostic, Severity, Span};
pub use expand::{expand, ExpandedProgram};
pub use parser::{parse, MAX_NESTING};
pub use printer::print;

/// Angle as written in a program, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Degrees(pub f64);

impl Degrees {
    pub fn from_radians(rad: f64) -> Self {
        Degrees(rad.to_degrees())
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }
}

/// Duration as written in a program, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Millis(pub f64);

impl Millis {
    pub fn from_seconds(s: f64) -> Self {
        Millis(s * 1e3)
    }

    pub fn seconds(self) -> f64 {
        self.0 * 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseTarget {
    Cc,
    Cs,
    All,
}

impl PulseTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            PulseTarget::Cc => "CC",
            PulseTarget::Cs => "CS",
            PulseTarget::All => "ALL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CC" => Some(PulseTarget::Cc),
            "CS" => Some(PulseTarget::Cs),
            "ALL" => Some(PulseTarget::All),
            _ => None,
        }
    }

    /// Frame groups touched by the target.
    pub(crate) fn groups(self) -> &'static [&'static str] {
        match self {
            PulseTarget::Cc => &["CC"],
            PulseTarget::Cs => &["CS"],
            PulseTarget::All => &["CC", "CS"],
        }
    }

    pub fn to_target(self) -> Target {
        match self {
            PulseTarget::Cc => Target::Center,
            PulseTarget::Cs => Target::Sides,
            PulseTarget::All => Target::All,
        }
    }
}

impl fmt::Display for PulseTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Pulse { target: PulseTarget, phi: Degrees, theta: Degrees },
    VirtualZ { target: PulseTarget, theta: Degrees },
    Delay(Millis),
    Decouple(DecouplingMode),
    Repeat { count: u32, body: Vec<Stmt> },
    Acquire { points: usize, dwell: Millis },
}

/// An event with the source span it was parsed from. Equality ignores the
/// span.
#[derive(Debug, Clone)]
pub struct Stmt {
    pub event: Event,
    pub span: Span,
}

impl Stmt {
    pub fn new(event: Event) -> Self {
        Stmt { event, span: Span::default() }
    }
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.event == other.event
    }
}

impl From<Event> for Stmt {
    fn from(event: Event) -> Self {
        Stmt::new(event)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseProgram {
    pub stmts: Vec<Stmt>,
}

impl PulseProgram {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        PulseProgram { stmts }
    }

    pub fn from_events(events: impl IntoIterator<Item = Event>) -> Self {
        PulseProgram { stmts: events.into_iter().map(Stmt::new).collect() }
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.stmts.iter().map(|s| &s.event)
    }

    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    /// The final acquisition, if present.
    pub fn acquisition(&self) -> Option<(usize, Millis)> {
        match self.stmts.last().map(|s| &s.event) {
            Some(Event::Acquire { points, dwell }) => Some((*points, *dwell)),
            _ => None,
        }
    }

    /// Pulses per target after unrolling repeats.
    pub fn pulse_count(&self, target: PulseTarget) -> usize {
        fn walk(stmts: &[Stmt], target: PulseTarget) -> usize {
            stmts
                .iter()
                .map(|s| match &s.event {
                    Event::Pulse { target: t, .. } if *t == target => 1,
                    Event::Repeat { count, body } => *count as usize * walk(body, target),
                    _ => 0,
                })
                .sum()
        }
        walk(&self.stmts, target)
    }

    /// Sum of all delays after unrolling repeats, in seconds.
    pub fn total_delay_s(&self) -> f64 {
        fn walk(stmts: &[Stmt]) -> f64 {
            stmts
                .iter()
                .map(|s| match &s.event {
                    Event::Delay(ms) => ms.seconds(),
                    Event::Repeat { count, body } => *count as f64 * walk(body),
                    _ => 0.0,
                })
                .sum()
        }
        walk(&self.stmts)
    }
}

impl fmt::Display for PulseProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
