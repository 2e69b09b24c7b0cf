use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;

use super::operator::{kron_factors, pauli, CMatrix, Operator, PauliAxis, C0, C1};
use super::SpinSystem;
use crate::{Error, Result};

/// Hermiticity tolerance (max-abs of ρ − ρ†) for a valid state.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance on |Tr ρ − 1|.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue tolerated after an evolution step.
pub const EIGEN_FLOOR: f64 = -1e-9;
/// Default thermal polarization.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Hermitian, unit-trace state on the register's product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    labels: Vec<String>,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validated constructor: dimension `2^labels.len()`, Hermitian and unit
    /// trace to the module tolerances. Positivity is not checked here.
    pub fn new(labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_parts(labels, matrix)?;
        rho.check_hermitian_trace(HERMITICITY_TOL, TRACE_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_parts(labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << labels.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        Ok(DensityMatrix { labels, matrix })
    }

    pub fn maximally_mixed(labels: Vec<String>) -> Self {
        let dim = 1usize << labels.len();
        let matrix = CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        DensityMatrix { labels, matrix }
    }

    /// Product state from one 2x2 factor per spin (roster order).
    pub fn product(labels: Vec<String>, factors: &[Matrix2<Complex64>]) -> Result<Self> {
        if factors.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: factors.len() });
        }
        DensityMatrix::new(labels, kron_factors(factors))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_spins(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownSpin(label.to_string()))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for c in 0..d {
            for r in 0..=c {
                worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace_error(&self) -> f64 {
        (self.trace() - C1).norm()
    }

    pub fn check_hermitian_trace(&self, herm_tol: f64, trace_tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > herm_tol {
            return Err(Error::InvalidState(format!("not Hermitian (error {h:e})")));
        }
        let t = self.trace_error();
        if t > trace_tol {
            return Err(Error::InvalidState(format!("trace deviates from 1 by {t:e}")));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every eigenvalue is ≥ `floor` (negative). Uses a Cholesky
    /// factorization of ρ − floor·I, which is much cheaper than a full
    /// eigendecomposition on large registers.
    pub fn eigenvalues_above(&self, floor: f64) -> bool {
        let d = self.dim();
        let mut a = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        for i in 0..d {
            a[(i, i)] -= Complex64::new(floor, 0.0);
        }
        cholesky_succeeds(a)
    }

    /// Full validity check used after evolution steps.
    pub fn validate(&self, tol: f64, floor: f64) -> Result<()> {
        self.check_hermitian_trace(tol, tol)?;
        if !self.eigenvalues_above(floor) {
            return Err(Error::InvalidState(format!("eigenvalue below {floor:e}")));
        }
        Ok(())
    }

    /// Tr(op · ρ).
    pub fn expectation(&self, op: &Operator) -> Result<Complex64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        let m = op.matrix();
        let d = self.dim();
        let mut acc = C0;
        for i in 0..d {
            for k in 0..d {
                acc += m[(i, k)] * self.matrix[(k, i)];
            }
        }
        Ok(acc)
    }

    /// Tr[(σ_x + iσ_y) ρ] on spin `index`, i.e. 2·Σ ρ[(..1..), (..0..)].
    pub fn transverse(&self, index: usize) -> Complex64 {
        let n = self.n_spins();
        let mask = 1usize << (n - 1 - index);
        let d = self.dim();
        let mut acc = C0;
        for a in (0..d).filter(|a| a & mask == 0) {
            acc += self.matrix[(a | mask, a)];
        }
        acc * 2.0
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Reduced state on the kept spins (roster order is preserved).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let n = self.n_spins();
        let mut kept = Vec::with_capacity(keep.len());
        for label in keep {
            kept.push(self.index_of(label)?);
        }
        kept.sort_unstable();
        kept.dedup();
        let traced: Vec<usize> = (0..n).filter(|i| !kept.contains(i)).collect();

        let bit = |i: usize| 1usize << (n - 1 - i);
        // scatter a reduced index onto full-index bit positions
        let spread = |sub: usize, which: &[usize]| -> usize {
            let m = which.len();
            which
                .iter()
                .enumerate()
                .filter(|(pos, _)| sub & (1 << (m - 1 - pos)) != 0)
                .fold(0, |acc, (_, &i)| acc | bit(i))
        };

        let dk = 1usize << kept.len();
        let dt = 1usize << traced.len();
        let mut out = CMatrix::zeros(dk, dk);
        for r in 0..dk {
            let fr = spread(r, &kept);
            for c in 0..dk {
                let fc = spread(c, &kept);
                let mut acc = C0;
                for e in 0..dt {
                    let fe = spread(e, &traced);
                    acc += self.matrix[(fr | fe, fc | fe)];
                }
                out[(r, c)] = acc;
            }
        }
        let labels = kept.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(DensityMatrix { labels, matrix: out })
    }

    /// ρ ← U_j ρ U_j† for a 2x2 unitary acting on spin `index`.
    pub(crate) fn apply_single(&mut self, index: usize, u: &Matrix2<Complex64>) {
        let n = self.n_spins();
        let d = self.dim();
        let mask = 1usize << (n - 1 - index);
        let data = self.matrix.as_mut_slice();
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        // left multiplication: mixes rows a and a|mask within every column
        for col in data.chunks_exact_mut(d) {
            for a in (0..d).filter(|a| a & mask == 0) {
                let (x0, x1) = (col[a], col[a | mask]);
                col[a] = u00 * x0 + u01 * x1;
                col[a | mask] = u10 * x0 + u11 * x1;
            }
        }
        // right multiplication by U†: mixes columns b and b|mask
        let (v00, v01, v10, v11) = (u00.conj(), u10.conj(), u01.conj(), u11.conj());
        for b in (0..d).filter(|b| b & mask == 0) {
            let (lo, hi) = data.split_at_mut((b | mask) * d);
            let c0 = &mut lo[b * d..b * d + d];
            let c1 = &mut hi[..d];
            for r in 0..d {
                let (x0, x1) = (c0[r], c1[r]);
                c0[r] = x0 * v00 + x1 * v10;
                c1[r] = x0 * v01 + x1 * v11;
            }
        }
    }

    /// ρ_ab ← u_a conj(u_b) ρ_ab for a diagonal unitary `u`.
    pub(crate) fn apply_diagonal(&mut self, u: &[Complex64]) {
        let d = self.dim();
        debug_assert_eq!(u.len(), d);
        for (b, col) in self.matrix.as_mut_slice().chunks_exact_mut(d).enumerate() {
            let ub = u[b].conj();
            for (x, ua) in col.iter_mut().zip(u) {
                *x *= ua * ub;
            }
        }
    }
}

/// Left-looking Cholesky on the lower triangle of a Hermitian matrix;
/// false as soon as a pivot is not strictly positive. Zero entries are
/// skipped, which pays off on the block-sparse states seen in practice.
fn cholesky_succeeds(mut a: CMatrix) -> bool {
    let n = a.nrows();
    let data = a.as_mut_slice();
    for j in 0..n {
        let (done, rest) = data.split_at_mut(j * n);
        let col = &mut rest[..n];
        for k in 0..j {
            let prev = &done[k * n..k * n + n];
            let c = prev[j].conj();
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for i in j..n {
                col[i] -= prev[i] * c;
            }
        }
        let pivot = col[j].re;
        if !(pivot > 0.0) {
            return false;
        }
        let s = pivot.sqrt();
        col[j] = Complex64::new(s, 0.0);
        for x in &mut col[j + 1..] {
            *x /= s;
        }
    }
    true
}

/// High-temperature thermal state: a sum over spins of
/// (σ0 + ε|0⟩⟨0|)/2 on that spin ⊗ σ0/2 on the rest.
#[derive(Debug, Clone)]
pub struct ThermalState {
    /// Trace of the unnormalized sum, n(1 + ε/2).
    pub raw_trace: f64,
    /// The sum, normalized to unit trace.
    pub state: DensityMatrix,
}

impl ThermalState {
    /// The observable-equivalent deviation form when only `observed` is
    /// read out: |0⟩⟨0| on `observed`, fully mixed elsewhere. The
    /// identity part of the observed spin does not produce signal.
    pub fn observable_equivalent(&self, observed: &str) -> Result<DensityMatrix> {
        polarized_on(self.state.labels().to_vec(), observed)
    }
}

pub fn thermal_state(system: &SpinSystem, epsilon: f64) -> Result<ThermalState> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("polarization must be > 0, got {epsilon}")));
    }
    let n = system.len();
    let half_id = pauli(PauliAxis::I) * Complex64::new(0.5, 0.0);
    let polarized = Matrix2::new(
        Complex64::new((1.0 + epsilon) / 2.0, 0.0),
        C0,
        C0,
        Complex64::new(0.5, 0.0),
    );
    let d = system.dim();
    let mut sum = CMatrix::zeros(d, d);
    for j in 0..n {
        let factors: Vec<_> = (0..n).map(|i| if i == j { polarized } else { half_id }).collect();
        sum += kron_factors(&factors);
    }
    let raw_trace = sum.trace().re;
    let state = DensityMatrix::new(system.labels(), sum / Complex64::new(raw_trace, 0.0))?;
    Ok(ThermalState { raw_trace, state })
}

fn polarized_on(labels: Vec<String>, observed: &str) -> Result<DensityMatrix> {
    let idx = labels
        .iter()
        .position(|l| l == observed)
        .ok_or_else(|| Error::UnknownSpin(observed.to_string()))?;
    let n = labels.len();
    let up = Matrix2::new(C1, C0, C0, C0);
    let half_id = pauli(PauliAxis::I) * Complex64::new(0.5, 0.0);
    let factors: Vec<_> = (0..n).map(|i| if i == idx { up } else { half_id }).collect();
    DensityMatrix::product(labels, &factors)
}

/// |+⟩⟨+| on CC ⊗ (|01⟩⟨01| + |10⟩⟨10|)/2 on CS1, CS2; any other spins fully
/// mixed.
pub fn prepare_rho_i(system: &SpinSystem) -> Result<DensityMatrix> {
    system.require(&["CC", "CS1", "CS2"])?;
    let n = system.len();
    let (cc, cs1, cs2) =
        (system.index_of("CC")?, system.index_of("CS1")?, system.index_of("CS2")?);
    let half = Complex64::new(0.5, 0.0);
    let plus = Matrix2::new(half, half, half, half);
    let up = Matrix2::new(C1, C0, C0, C0);
    let down = Matrix2::new(C0, C0, C0, C1);
    let half_id = pauli(PauliAxis::I) * half;

    let branch = |a: Matrix2<Complex64>, b: Matrix2<Complex64>| {
        let factors: Vec<_> = (0..n)
            .map(|i| match i {
                i if i == cc => plus,
                i if i == cs1 => a,
                i if i == cs2 => b,
                _ => half_id,
            })
            .collect();
        kron_factors(&factors)
    };
    let m = (branch(up, down) + branch(down, up)) * half;
    DensityMatrix::new(system.labels(), m)
}
