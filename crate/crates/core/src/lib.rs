//! Desk-scale CNN / accelerator co-design workbench.
//!
//! The crate provides the pieces of a joint design-space search: a CNN
//! computational-graph space with isomorphism hashing and graph edit
//! distance, distance-preserving graph embeddings, a 13-hyperparameter
//! accelerator space with an analytic cycle-level cost model, a
//! heteroscedastic neural surrogate with epistemic uncertainty, second-order
//! ascent over the input embedding, and the active-learning loop that ties
//! them together. CNN training is replaced by pluggable accuracy oracles
//! (tabular benchmarks or a seeded synthetic landscape).

pub mod accel;
pub mod cnn;
pub mod embed;
pub mod error;
pub mod eval;
pub mod gobi;
pub mod search;
pub mod sim;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
