//! Matrix Riccati comparison tools for fat sub-Riemannian structures.
//!
//! The crate is organised around five layers:
//!
//! * [`scalar_models`]: closed-form model functions `s_{κa,κb}` and `s_κ` and their blow-up times.
//! * [`riccati_engine`]: the linear Jacobi system behind the matrix Riccati equation,
//!   blow-up detection, comparison and Kalman checks.
//! * [`fat_structure`]: the `(a, b, c)` block split, structural matrices and the traced reductions.
//! * [`sasakian_curvature`]: canonical curvature blocks of 3-Sasakian manifolds.
//! * [`qhf_geodesics`]: extremals of the quaternionic Hopf fibration, conjugate times and
//!   sub-Laplacian comparison.
//!
//! [`verify`] bundles the end-to-end numerical checks used by the command-line runner.

pub mod error;
pub mod fat_structure;
pub mod ode;
pub mod qhf_geodesics;
pub mod riccati_engine;
pub mod sasakian_curvature;
pub mod scalar_models;
pub mod verify;

pub use error::{Error, Result};
pub use scalar_models::BlowUpTime;
