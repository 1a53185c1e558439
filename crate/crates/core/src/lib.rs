//! Collective equation discovery.
//!
//! A population of hypothesis-generating agents proposes symbolic
//! expressions, each proposal is parameter-fitted and scored by fit quality
//! plus structural complexity, and the best equation found so far is
//! analysed and broadcast back to every agent as shared knowledge.

pub mod benchmarks;
pub mod data;
pub mod discovery;
pub mod expr;
pub mod fit;
pub mod generators;
pub mod metrics;
pub mod real;

pub use data::{Dataset, Split};
pub use expr::{Expression, ExprError};
