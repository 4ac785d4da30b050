//! Numerical laboratory for grand-canonical mean-field fermion models on a
//! discretized 1D/2D domain: Hartree-Fock and reduced Hartree-Fock via
//! self-consistent field iteration, Thomas-Fermi via fixed point and
//! projected gradient, the Vlasov phase-space functional, coherent-state
//! Husimi transforms, heat-kernel diagonals, and a toy-scale many-body
//! exact-diagonalization oracle. The `harness` module ties these together
//! into hbar-sweeps that measure convergence towards the Thomas-Fermi model.

pub mod config;
pub mod energies;
pub mod harness;
pub mod lattice;
pub mod manybody;
pub mod operators;
pub mod phase_space;
pub mod scf;
pub mod testing;
pub mod thomas_fermi;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("solver did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("energy fell below the divergence floor {floor:.3e} (reached {value:.3e}); the model is likely not repulsive")]
    EnergyDiverged { floor: f64, value: f64 },
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
    #[error("momentum grid too small: need half-width >= {needed:.3e}, have {have:.3e}")]
    MomentumGridTooSmall { needed: f64, have: f64 },
    #[error("occupancy violation: {0}")]
    OccupancyViolation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
