//! Numerical laboratory for one-dimensional symmetric diffusions
//! `dX = -V'(X) dt + √2 dW` with invariant measure `μ = e^{-V}/Z dx`.
//!
//! Lyapunov drift conditions, exponential moments of hitting times,
//! functional inequalities and their ergodic consequences are each computed
//! by at least two independent routes (spectral or PDE solves, Monte Carlo,
//! quadrature) so they can be cross-checked.

pub mod ergodicity;
pub mod error;
pub mod fenchel;
pub mod generator;
pub mod hitting;
pub mod integrability;
pub mod ladder;
pub mod lyapunov;
pub mod numerics;
pub mod scenario;

pub use error::{Error, Result};
