//! Numerical building blocks shared by the spectral modules.

pub mod lattice;
pub mod linalg;
pub mod quad;
pub mod special;
pub mod sum;
