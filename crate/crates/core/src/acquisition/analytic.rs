use num_complex::Complex64;

use super::fid::Fid;
use crate::{Error, Result};

/// Parameters of the closed-form three-line signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModelParams {
    /// Phase picked up by the sensor, rad.
    pub theta: f64,
    /// Center-side coupling, rad/s.
    pub j: f64,
    /// Center-spin offset in the receiver frame, rad/s.
    pub omega0: f64,
    /// Transverse decay time, s (`f64::INFINITY` for no decay).
    pub t2: f64,
}

impl SignalModelParams {
    pub fn new(theta: f64, j: f64, omega0: f64, t2: f64) -> Result<Self> {
        if !(t2 > 0.0) {
            return Err(Error::InvalidParameter(format!("T2 must be > 0, got {t2}")));
        }
        if !(theta.is_finite() && j.is_finite() && omega0.is_finite()) {
            return Err(Error::InvalidParameter("signal parameters must be finite".into()));
        }
        Ok(SignalModelParams { theta, j, omega0, t2 })
    }

    /// `θ = γ_G · B · τ`.
    pub fn theta_from_field(gamma: f64, field: f64, tau: f64) -> f64 {
        gamma * field * tau
    }
}

/// Where the sensed field acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    /// On the center spin: all three lines pick up θ.
    CenterField,
    /// On the side spins: the outer lines pick up ±2θ.
    SideField,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::CenterField => "center_field",
            SignalKind::SideField => "side_field",
        }
    }

    /// Expected phases of the (ω0 + J, ω0, ω0 − J) lines.
    pub fn expected_phases(self, theta: f64) -> [f64; 3] {
        match self {
            SignalKind::CenterField => [theta; 3],
            SignalKind::SideField => [2.0 * theta, 0.0, -2.0 * theta],
        }
    }
}

fn envelope(p: &SignalModelParams, t: f64) -> f64 {
    if p.t2.is_infinite() {
        0.25
    } else {
        0.25 * (-t / p.t2).exp()
    }
}

/// Quadrature-detected signal: the three-line envelope on an `e^{iω0 t}`
/// carrier.
///
/// center: `¼e^{−t/T2}(e^{−iJt} + 2 + e^{iJt}) e^{i(ω0 t + θ)}`
/// side:   `¼e^{−t/T2}(e^{−iJt−2iθ} + 2 + e^{iJt+2iθ}) e^{iω0 t}`
pub fn analytic_signal(p: &SignalModelParams, kind: SignalKind, t: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let (jt, a) = (p.j * t, envelope(p, t));
    let lines = match kind {
        SignalKind::CenterField => {
            (Complex64::from_polar(1.0, -jt) + 2.0 + Complex64::from_polar(1.0, jt))
                * Complex64::from_polar(1.0, p.theta)
        }
        SignalKind::SideField => {
            let th = 2.0 * p.theta;
            Complex64::from_polar(1.0, -jt - th) + 2.0 + Complex64::from_polar(1.0, jt + th)
        }
    };
    Ok(lines * a * Complex64::from_polar(1.0, p.omega0 * t))
}

/// The same envelope on a real cosine carrier.
///
/// center: `¼e^{−t/T2}(e^{−iJt} + 2 + e^{iJt}) cos(ω0 t + θ)`
/// side:   `¼e^{−t/T2}(e^{−iJt−2iθ} + 2 + e^{iJt+2iθ}) cos(ω0 t)`
pub fn analytic_signal_real_carrier(p: &SignalModelParams, kind: SignalKind, t: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let (jt, a) = (p.j * t, envelope(p, t));
    let three = |extra: f64| Complex64::from_polar(1.0, -jt - extra) + 2.0 + Complex64::from_polar(1.0, jt + extra);
    Ok(match kind {
        SignalKind::CenterField => three(0.0) * a * (p.omega0 * t + p.theta).cos(),
        SignalKind::SideField => three(2.0 * p.theta) * a * (p.omega0 * t).cos(),
    })
}

pub fn analytic_fid(p: &SignalModelParams, kind: SignalKind, points: usize, dwell_s: f64) -> Result<Fid> {
    let samples = (0..points)
        .map(|m| analytic_signal(p, kind, m as f64 * dwell_s))
        .collect::<Result<Vec<_>>>()?;
    Fid::new(samples, dwell_s, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn params(theta: f64) -> SignalModelParams {
        SignalModelParams::new(theta, TAU * 38.4, TAU * 100.0, 0.1).unwrap()
    }

    #[test]
    fn value_at_zero() {
        let th = 0.7;
        let real = analytic_signal_real_carrier(&params(th), SignalKind::CenterField, 0.0).unwrap();
        assert!((real - Complex64::new(th.cos(), 0.0)).norm() < 1e-15);
        let quad = analytic_signal(&params(th), SignalKind::CenterField, 0.0).unwrap();
        assert!((quad - Complex64::from_polar(1.0, th)).norm() < 1e-15);
    }

    #[test]
    fn kinds_coincide_at_zero_theta() {
        for k in 0..50 {
            let t = k as f64 * 1.7e-3;
            let a = analytic_signal(&params(0.0), SignalKind::CenterField, t).unwrap();
            let b = analytic_signal(&params(0.0), SignalKind::SideField, t).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SignalModelParams::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(analytic_signal(&params(0.0), SignalKind::SideField, -1.0).is_err());
    }
}
