//! Ideal instantaneous rotations, virtual-Z frame tracking and the
//! pseudo-CNOT of the star-topology register.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::hamiltonian::{build_hamiltonian, entangling_delay, EntanglingMode, Frame};
use crate::spin::{embed_single, CMatrix, DensityMatrix, Operator, SpinSystem, C0, C1, CI};
use crate::{Error, Result};

/// Spins addressed by a rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// The center carbon `CC`.
    Center,
    /// Every spin whose label starts with `CS`.
    Sides,
    /// Center and sides together.
    All,
    /// An explicit list of labels.
    Spins(Vec<String>),
}

impl Target {
    /// Roster indices selected by the target, ascending.
    pub fn resolve(&self, system: &SpinSystem) -> Result<Vec<usize>> {
        let is_side = |name: &str| name.starts_with("CS");
        let idx: Vec<usize> = match self {
            Target::Center => system.index_of("CC").map(|i| vec![i]).unwrap_or_default(),
            Target::Sides => (0..system.len()).filter(|&i| is_side(&system.spins()[i].name)).collect(),
            Target::All => (0..system.len())
                .filter(|&i| {
                    let name = &system.spins()[i].name;
                    name == "CC" || is_side(name)
                })
                .collect(),
            Target::Spins(labels) => {
                let mut v = labels.iter().map(|l| system.index_of(l)).collect::<Result<Vec<_>>>()?;
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        if idx.is_empty() {
            return Err(Error::EmptyTarget(self.to_string()));
        }
        Ok(idx)
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Center => f.write_str("CC"),
            Target::Sides => f.write_str("CS"),
            Target::All => f.write_str("ALL"),
            Target::Spins(l) => f.write_str(&l.join(",")),
        }
    }
}

/// `R(φ, θ)` on every spin of `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub target: Target,
    pub phi: f64,
    pub theta: f64,
}

impl Rotation {
    pub fn new(target: Target, phi: f64, theta: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidParameter("rotation angles must be finite".into()));
        }
        Ok(Rotation { target, phi, theta })
    }
}

/// `exp(−iθ(σx cos φ + σy sin φ)/2)`.
pub fn rotation_matrix(phi: f64, theta: f64) -> Matrix2<Complex64> {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    Matrix2::new(
        c,
        -CI * s * Complex64::from_polar(1.0, -phi),
        -CI * s * Complex64::from_polar(1.0, phi),
        c,
    )
}

/// `exp(−iθσz/2)`.
pub fn z_matrix(theta: f64) -> Matrix2<Complex64> {
    Matrix2::new(Complex64::from_polar(1.0, -theta / 2.0), C0, C0, Complex64::from_polar(1.0, theta / 2.0))
}

fn collective(system: &SpinSystem, targets: &[usize], single: &Matrix2<Complex64>) -> Operator {
    let n = system.len();
    let mut m = CMatrix::identity(system.dim(), system.dim());
    for &t in targets {
        m = embed_single(n, t, single) * m;
    }
    Operator::unitary_unchecked(m)
}

pub fn rotation_unitary(r: &Rotation, system: &SpinSystem) -> Result<Operator> {
    let targets = r.target.resolve(system)?;
    Ok(collective(system, &targets, &rotation_matrix(r.phi, r.theta)))
}

pub fn z_unitary(target: &Target, theta: f64, system: &SpinSystem) -> Result<Operator> {
    let targets = target.resolve(system)?;
    Ok(collective(system, &targets, &z_matrix(theta)))
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Accumulated virtual-Z angles, keyed by label.
///
/// A pending `Z(θ)` followed by `R(φ, ·)` equals `R(φ − θ, ·)` followed by
/// `Z(θ)`, so the frame shifts later pulse phases by `−θ` and the Z itself
/// moves towards the end of the sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseFrame {
    angles: BTreeMap<String, f64>,
}

impl PhaseFrame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn angle(&self, label: &str) -> f64 {
        self.angles.get(label).copied().unwrap_or(0.0)
    }

    /// Phase at which a pulse nominally at `phi` must be applied.
    pub fn shifted_phi(&self, label: &str, phi: f64) -> f64 {
        phi - self.angle(label)
    }

    pub fn virtual_z<'a>(&self, labels: impl IntoIterator<Item = &'a str>, theta: f64) -> PhaseFrame {
        let mut out = self.clone();
        for l in labels {
            let a = out.angles.entry(l.to_string()).or_insert(0.0);
            *a = wrap_angle(*a + theta);
        }
        out
    }

    pub fn inverse(&self) -> PhaseFrame {
        PhaseFrame { angles: self.angles.iter().map(|(k, v)| (k.clone(), wrap_angle(-v))).collect() }
    }

    pub fn compose(&self, other: &PhaseFrame) -> PhaseFrame {
        let mut out = self.clone();
        for (k, v) in &other.angles {
            let a = out.angles.entry(k.clone()).or_insert(0.0);
            *a = wrap_angle(*a + v);
        }
        out
    }

    /// True when every tracked angle is zero to `tol`.
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.angles.values().all(|a| a.abs() <= tol)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.angles.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// `UρU†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &Operator) -> Result<DensityMatrix> {
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: u.dim() });
    }
    let m = u.matrix() * rho.matrix() * u.matrix().adjoint();
    DensityMatrix::from_parts(rho.labels().to_vec(), m)
}

/// `exp(−iπ(σz_CC σz_CS1 + σz_CC σz_CS2)/4)` on the register.
pub fn ideal_entangler(system: &SpinSystem) -> Result<Operator> {
    system.require(&["CC", "CS1", "CS2"])?;
    let n = system.len();
    let cc = system.index_of("CC")?;
    let s1 = system.index_of("CS1")?;
    let s2 = system.index_of("CS2")?;
    let z = |a: usize, j: usize| if a >> (n - 1 - j) & 1 == 0 { 1.0 } else { -1.0 };
    let diag = (0..system.dim())
        .map(|a| {
            let e = z(a, cc) * (z(a, s1) + z(a, s2));
            Complex64::from_polar(1.0, -FRAC_PI_4 * e)
        })
        .collect::<Vec<_>>();
    Ok(Operator::unitary_unchecked(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))))
}

/// The entangling free evolution. Ideal mode is the exact ZZ unitary;
/// quantized mode is the register's own free propagator in the circuit
/// frame over the quantized delay.
pub fn entangler(system: &SpinSystem, mode: EntanglingMode) -> Result<Operator> {
    match mode {
        EntanglingMode::Ideal => ideal_entangler(system),
        EntanglingMode::Quantized => {
            let delay = entangling_delay(system, mode)?;
            let h = build_hamiltonian(system, &Frame::circuit(system)?)?;
            h.free_propagator(delay.duration_s)
        }
    }
}

/// Pseudo-CNOT with CC as control and both side carbons as targets:
///
/// ```text
/// e^{−iπ/4} Z_C(−π/2) Z_S(−π/2) R_S(0, π/2) U_E R_S(π/2, π/2)
/// ```
pub fn pseudo_cnot(system: &SpinSystem, mode: EntanglingMode) -> Result<Operator> {
    let ue = entangler(system, mode)?;
    let sides = Target::Spins(vec!["CS1".into(), "CS2".into()]);
    let first = rotation_unitary(&Rotation::new(sides.clone(), FRAC_PI_2, FRAC_PI_2)?, system)?;
    let second = rotation_unitary(&Rotation::new(sides.clone(), 0.0, FRAC_PI_2)?, system)?;
    let zs = z_unitary(&sides, -FRAC_PI_2, system)?;
    let zc = z_unitary(&Target::Center, -FRAC_PI_2, system)?;
    let u = first.then(&ue)?.then(&second)?.then(&zs)?.then(&zc)?;
    Ok(u.scaled(Complex64::from_polar(1.0, -FRAC_PI_4)))
}

/// The target 8x8 matrix on (CC, CS1, CS2): identity on the CC = 0 block
/// and `i` on the anti-diagonal of the CC = 1 block.
pub fn pseudo_cnot_reference() -> Operator {
    let mut m = CMatrix::zeros(8, 8);
    for a in 0..4 {
        m[(a, a)] = C1;
        m[(4 + a, 7 - a)] = CI;
    }
    Operator::unitary_unchecked(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{kron_factors, pauli, PauliAxis};

    fn chain() -> SpinSystem {
        SpinSystem::two_propanol().subsystem(&["CC", "CS1", "CS2"]).unwrap()
    }

    fn one() -> SpinSystem {
        SpinSystem::with_offsets(&[("CC", 0.0)], &[]).unwrap()
    }

    fn close(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn x_pi_pulse_is_minus_i_sigma_x() {
        let r = rotation_matrix(0.0, PI);
        assert!(close(&r, &(pauli(PauliAxis::X) * -CI)) < 1e-15);
    }

    #[test]
    fn inverse_pair_is_identity() {
        let r = rotation_matrix(FRAC_PI_2, -FRAC_PI_2) * rotation_matrix(FRAC_PI_2, FRAC_PI_2);
        assert!(close(&r, &pauli(PauliAxis::I)) < 1e-15);
    }

    #[test]
    fn hadamard_equivalent_prepares_minus_state() {
        // both spellings of the Hadamard-equivalent pulse
        for (phi, theta) in [(FRAC_PI_2, -FRAC_PI_2), (-FRAC_PI_2, FRAC_PI_2)] {
            let r = rotation_matrix(phi, theta);
            let up = Matrix2::new(C1, C0, C0, C0);
            let out = r * up * r.adjoint();
            let h = Complex64::new(0.5, 0.0);
            let minus = Matrix2::new(h, -h, -h, h);
            assert!(close(&out, &minus) < 1e-15);
        }
    }

    #[test]
    fn unknown_or_empty_targets_rejected() {
        let sys = SpinSystem::with_offsets(&[("X1", 0.0)], &[]).unwrap();
        let r = Rotation::new(Target::Center, 0.0, PI).unwrap();
        assert!(matches!(rotation_unitary(&r, &sys), Err(Error::EmptyTarget(_))));
        let r = Rotation::new(Target::Spins(vec!["Q".into()]), 0.0, PI).unwrap();
        assert!(matches!(rotation_unitary(&r, &sys), Err(Error::UnknownSpin(_))));
        assert!(Rotation::new(Target::All, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn collective_side_rotation_is_kronecker_product() {
        let sys = chain();
        let (phi, theta) = (0.3, 1.1);
        let r = rotation_unitary(&Rotation::new(Target::Sides, phi, theta).unwrap(), &sys).unwrap();
        let single = rotation_matrix(phi, theta);
        let explicit = kron_factors(&[pauli(PauliAxis::I), single, single]);
        assert!(r.max_abs_diff(&Operator::new(explicit)) < 1e-15);
        assert!(r.unitarity_error() < 1e-12);
    }

    #[test]
    fn virtual_z_then_pulse_equals_conjugated_pulse() {
        // a pulse at the frame-shifted phase equals Z(θ) R(φ) Z(−θ)
        let (phi, theta) = (0.4, 50f64.to_radians());
        let frame = PhaseFrame::new().virtual_z(["CC"], theta);
        let shifted = rotation_matrix(frame.shifted_phi("CC", phi), PI);
        let conj = z_matrix(-theta) * rotation_matrix(phi, PI) * z_matrix(theta);
        assert!(close(&shifted, &conj) < 1e-15);
        // and R(φ)Z(θ) = Z(θ)R(φ − θ)
        let lhs = rotation_matrix(phi, 0.7) * z_matrix(theta);
        let rhs = z_matrix(theta) * rotation_matrix(phi - theta, 0.7);
        assert!(close(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn virtual_z_bookkeeping() {
        let f = PhaseFrame::new();
        assert_eq!(f.virtual_z(["CC"], 0.0).angle("CC"), 0.0);
        let a = f.virtual_z(["CC"], 0.4).virtual_z(["CC"], 0.5);
        assert!((a.angle("CC") - 0.9).abs() < 1e-15);
        assert!(a.compose(&a.inverse()).is_trivial(1e-15));
        let wrapped = f.virtual_z(["CC"], 3.0 * PI);
        assert!((wrapped.angle("CC") - PI).abs() < 1e-12);
    }

    #[test]
    fn z_unitary_on_one_spin() {
        let z = z_unitary(&Target::Center, PI, &one()).unwrap();
        assert!((z.matrix()[(0, 0)] + CI).norm() < 1e-15);
        assert!((z.matrix()[(1, 1)] - CI).norm() < 1e-15);
    }

    #[test]
    fn ideal_cnot_matches_reference_exactly() {
        let u = pseudo_cnot(&chain(), EntanglingMode::Ideal).unwrap();
        let reference = pseudo_cnot_reference();
        assert!(u.max_abs_diff(&reference) < 1e-14);
        assert!(u.distance_up_to_phase(&reference) < 1e-14);
    }

    #[test]
    fn cnot_squared_is_control_z() {
        let u = pseudo_cnot(&chain(), EntanglingMode::Ideal).unwrap();
        let sq = u.then(&u).unwrap();
        // derived from the reference: i^2 = −1 on the CC = 1 block
        let mut want = CMatrix::identity(8, 8);
        for a in 4..8 {
            want[(a, a)] = -C1;
        }
        assert!(sq.distance_up_to_phase(&Operator::new(want)) < 1e-14);
    }

    #[test]
    fn cnot_truth_table() {
        let u = pseudo_cnot(&chain(), EntanglingMode::Ideal).unwrap();
        for a in 0..8usize {
            let mut col = u.matrix().column(a).iter().map(|z| z.norm()).collect::<Vec<_>>();
            let want = if a < 4 { a } else { 4 | (!a & 3) };
            assert!((col[want] - 1.0).abs() < 1e-14);
            col[want] = 0.0;
            assert!(col.iter().all(|&x| x < 1e-14));
        }
    }

    #[test]
    fn quantized_cnot_is_close_but_not_exact() {
        let sys = chain();
        let u = pseudo_cnot(&sys, EntanglingMode::Quantized).unwrap();
        let d = u.distance_up_to_phase(&pseudo_cnot_reference());
        assert!(d > 1e-6 && d < 0.1, "distance {d}");
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn cnot_needs_chain() {
        assert!(matches!(pseudo_cnot(&one(), EntanglingMode::Ideal), Err(Error::MissingSpins(_))));
    }

    #[test]
    fn apply_unitary_dimension_check() {
        let rho = DensityMatrix::maximally_mixed(vec!["CC".into()]);
        assert!(apply_unitary(&rho, &Operator::identity(4)).is_err());
        let same = apply_unitary(&rho, &Operator::identity(2)).unwrap();
        assert_eq!(same, rho);
    }
}
