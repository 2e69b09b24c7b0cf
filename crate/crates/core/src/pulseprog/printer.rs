use std::fmt::Write;

use super::{Event, PulseProgram, Stmt};

/// Canonical text of a program. Numbers use the shortest representation
/// that parses back to the same value.
pub fn print(program: &PulseProgram) -> String {
    let mut out = String::new();
    write_block(&mut out, &program.stmts, 0);
    out
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    let indent = "  ".repeat(depth);
    for s in stmts {
        out.push_str(&indent);
        match &s.event {
            Event::Pulse { target, phi, theta } => {
                let _ = writeln!(out, "pulse {target} {} {}", phi.0, theta.0);
            }
            Event::VirtualZ { target, theta } => {
                let _ = writeln!(out, "zrot {target} {}", theta.0);
            }
            Event::Delay(ms) => {
                let _ = writeln!(out, "delay {}", ms.0);
            }
            Event::Decouple(mode) => {
                let _ = writeln!(out, "decouple {mode}");
            }
            Event::Repeat { count, body } => {
                let _ = writeln!(out, "repeat {count} {{");
                write_block(out, body, depth + 1);
                out.push_str(&indent);
                out.push_str("}\n");
            }
            Event::Acquire { points, dwell } => {
                let _ = writeln!(out, "acquire {points} {}", dwell.0);
            }
        }
    }
}
