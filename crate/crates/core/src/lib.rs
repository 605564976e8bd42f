//! Eigenvalue iterations for Bloch-periodic photonic crystal problems on a
//! finite-element discretization of the unit cell.
//!
//! The crate covers the periodic Q2 mesh, assembly of the shifted-gradient
//! forms, sparse Hermitian linear algebra, permittivity models, inverse
//! power and Arnoldi iterations, the linearized Drude-Lorentz companion
//! problem, a bordered Newton method for general real dispersion, and a
//! driver that interleaves iteration with mesh refinement.

pub mod assembly;
pub mod companion;
pub mod dispersion;
pub mod driver;
pub mod eigeniter;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod newton;

pub use error::{Error, Result};
