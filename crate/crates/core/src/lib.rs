//! Numerical laboratory for nonsingular Poisson suspensions.
//!
//! Base measures live on the real line ([`measure`]); Poisson configurations are
//! sampled on finite-measure windows ([`process`]); nonsingular maps carry their
//! Radon–Nikodym derivatives ([`nsmap`]). On top of these sit coherent vectors
//! ([`coherent`]), suspension Radon–Nikodym derivatives and stochastic integrals
//! ([`suspension`]), infinitely divisible laws ([`infdiv`]), action-level
//! diagnostics ([`dynamics`]) and two explicit product constructions
//! ([`constructions`]). [`scenario`] runs declarative batteries of checks.

// Negated comparisons reject NaN on purpose; quadrature nodes are quoted in full.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod coherent;
pub mod constructions;
pub mod dynamics;
pub mod error;
pub mod infdiv;
pub mod mc;
pub mod measure;
pub mod nsmap;
pub mod process;
pub mod quad;
pub mod scenario;
pub mod suspension;

pub use error::{Error, Result};
pub use measure::{BaseMeasure, Support, Window};
pub use process::PointConfig;
