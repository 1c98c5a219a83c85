//! Two explicit product-space constructions, truncated to finitely many levels.
//!
//! [`propt`] builds a density `F² = 1 + Σ 2ⁿ 1_{Bₙ}` over a diagonal odometer
//! action whose κ-entropy stays bounded. [`bernoulli`] builds a shift-invariant
//! Bernoulli base with a density `F = 1 + Σ Y_k` whose suspension has a
//! summable dissipativity series.

use serde::Serialize;

pub mod bernoulli;
pub mod propt;

pub use bernoulli::BernoulliExample;
pub use propt::{DigitFamily, PropTConstruction};

/// Summary of a truncated product base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductBase {
    /// Number of materialised levels.
    pub levels: usize,
    /// Probability of the distinguished symbol at each level.
    pub symbol_probability: Vec<f64>,
    pub action: String,
    /// Analytic bound on the effect of the levels that were not materialised.
    pub tail_bound: f64,
}
