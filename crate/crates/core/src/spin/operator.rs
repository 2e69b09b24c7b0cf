use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use super::SpinSystem;
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C1: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `U U† = I` for operators flagged unitary.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> Matrix2<Complex64> {
    match axis {
        PauliAxis::I => Matrix2::new(C1, C0, C0, C1),
        PauliAxis::X => Matrix2::new(C0, C1, C1, C0),
        PauliAxis::Y => Matrix2::new(C0, -CI, CI, C0),
        PauliAxis::Z => Matrix2::new(C1, C0, C0, -C1),
    }
}

/// Dense square operator on the register's product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    unitary: bool,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Self {
        assert!(matrix.is_square(), "operators are square");
        Operator { matrix, unitary: false }
    }

    /// Wraps `matrix` and flags it unitary after checking `U U† = I`.
    pub fn unitary(matrix: CMatrix) -> Result<Self> {
        let op = Operator { matrix, unitary: true };
        let err = op.unitarity_error();
        // roundoff grows with dimension, so scale the tolerance gently
        let tol = UNITARY_TOL * (op.dim() as f64).sqrt().max(1.0);
        if err > tol {
            return Err(Error::InvalidParameter(format!("operator is not unitary (error {err:e})")));
        }
        Ok(op)
    }

    pub(crate) fn unitary_unchecked(matrix: CMatrix) -> Self {
        Operator { matrix, unitary: true }
    }

    pub fn identity(dim: usize) -> Self {
        Operator { matrix: CMatrix::identity(dim, dim), unitary: true }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// Max-abs entry of `U U† - I`.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let prod = &self.matrix * self.matrix.adjoint();
        (prod - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn dagger(&self) -> Operator {
        Operator { matrix: self.matrix.adjoint(), unitary: self.unitary }
    }

    /// `self` followed by `later`, i.e. the matrix product `later * self`.
    pub fn then(&self, later: &Operator) -> Result<Operator> {
        if later.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: later.dim() });
        }
        Ok(Operator { matrix: &later.matrix * &self.matrix, unitary: self.unitary && later.unitary })
    }

    pub fn scaled(&self, factor: Complex64) -> Operator {
        let unitary = self.unitary && (factor.norm() - 1.0).abs() < 1e-15;
        Operator { matrix: &self.matrix * factor, unitary }
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator {
            matrix: self.matrix.kronecker(&other.matrix),
            unitary: self.unitary && other.unitary,
        }
    }

    /// Max-abs distance to `other` after removing global phase: both
    /// matrices are rotated so their first nonzero entry (column-major scan
    /// of `other`) is real positive.
    pub fn distance_up_to_phase(&self, other: &Operator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let Some(k) = other.matrix.iter().position(|z| z.norm() > 1e-12) else {
            return self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        };
        let a = self.matrix.as_slice()[k];
        let b = other.matrix.as_slice()[k];
        if a.norm() < 1e-12 {
            return f64::INFINITY;
        }
        let pa = (a / a.norm()).conj();
        let pb = (b / b.norm()).conj();
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(x, y)| (x * pa - y * pb).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.matrix.iter().zip(other.matrix.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }
}

/// Kronecker product of one 2x2 factor per spin (roster order).
pub fn kron_factors(factors: &[Matrix2<Complex64>]) -> CMatrix {
    let mut out = CMatrix::from_element(1, 1, C1);
    for f in factors {
        let f = CMatrix::from_iterator(2, 2, f.iter().copied());
        out = out.kronecker(&f);
    }
    out
}

/// `single` on spin `index` of an `n`-spin register, identity elsewhere.
pub fn embed_single(n: usize, index: usize, single: &Matrix2<Complex64>) -> CMatrix {
    let factors: Vec<_> =
        (0..n).map(|i| if i == index { *single } else { pauli(PauliAxis::I) }).collect();
    kron_factors(&factors)
}

/// σ_axis on the named spin, identity on every other tensor factor.
pub fn embed_pauli(system: &SpinSystem, spin: &str, axis: PauliAxis) -> Result<Operator> {
    let i = system.index_of(spin)?;
    Ok(Operator::unitary_unchecked(embed_single(system.len(), i, &pauli(axis))))
}
