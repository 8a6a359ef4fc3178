//! Positive solutions of the fractional Dirichlet problem
//!
//! ```text
//! D^α u + h(t) f(u) = 0,  0 < t < 1,   u(0) = u(1) = 0,   1 < α ≤ 2,
//! ```
//!
//! through its integral form `u = ∫₀¹ G(·,s,α) h(s) f(u(s)) ds`.

pub mod eigen;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod ode;
pub mod operator;
pub mod quadrature;
pub mod shooting;
pub mod sublinear;
pub mod superlinear;

pub use error::{Error, Result};
