//! Low-level numerical kernels shared by the higher modules.

pub mod fit;
pub mod optimize;
pub mod quadrature;
pub mod tridiag;
