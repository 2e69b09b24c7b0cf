//! Spin rosters, operators on the product space and density matrices.

mod density;
mod operator;
mod system;

pub use density::{
    prepare_rho_i, thermal_state, DensityMatrix, ThermalState, DEFAULT_EPSILON, EIGEN_FLOOR,
    HERMITICITY_TOL, TRACE_TOL,
};
pub(crate) use operator::{C0, C1, CI};
pub use operator::{
    embed_pauli, embed_single, kron_factors, pauli, CMatrix, Operator, PauliAxis, UNITARY_TOL,
};
pub use system::{Species, Spin, SpinSystem};
