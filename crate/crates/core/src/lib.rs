//! Lagrangian and Hamiltonian mechanics on tangent and cotangent bundles
//! split by a nonlinear connection.

pub mod cli;
pub mod error;
pub mod expr;
pub mod forms;
pub mod frame;
pub mod hamiltonian;
pub mod integrate;
pub mod lagrangian;
mod linalg;
pub mod point;
pub mod verify;

pub use error::{Error, Result};
pub use point::BundlePoint;
