//! Homogeneous geometric multigrid for hybridizable discontinuous Galerkin
//! (HDG) discretizations of the Poisson problem on the unit square.
//!
//! The solver works directly on the skeleton unknowns: trace functions λ on
//! the interior edges of a hierarchy of triangular meshes obtained by regular
//! refinement. Cell unknowns (u, q) are eliminated by static condensation,
//! leaving on every level a sparse SPD system A_ℓ λ = b_ℓ which the V-cycle
//! treats with pointwise smoothers and one of four coarse-to-fine injection
//! operators for the non-nested trace spaces.
//!
//! Module map:
//! * [`mesh`] — criss-cross initial mesh, red refinement, parent/child data
//! * [`skeleton`] — per-edge Lagrange trace spaces and the scaled inner product
//! * [`hdg`] — local solvers (LDG-H, RT-H, BDM-H), condensation, reconstruction
//! * [`transfer`] — the injection operators I⁰..I³ and restriction
//! * [`multigrid`] — smoothers, V-cycle, stationary outer iteration
//! * [`diagnostics`] — numerical certificates for the convergence assumptions
//! * [`quadrature`], [`poly`], [`eigen`], [`sparse`] — shared numerics

pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod hdg;
pub mod mesh;
pub mod multigrid;
pub mod oracles;
pub mod poly;
pub mod quadrature;
pub mod skeleton;
pub mod sparse;
pub mod transfer;

pub use error::Error;

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
