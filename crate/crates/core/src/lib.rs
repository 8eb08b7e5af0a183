//! Extraction of compact symbolic models from simulated swarm behaviour.
//!
//! The pipeline has two phases. A neural edge model is trained on simulated
//! interaction data and then queried as a data interpolator; the samples it
//! produces feed a nested evolutionary search (macro layer over expression
//! structure, micro layer over the expression's numeric parameters).

pub mod analysis;
pub mod datasets;
pub mod error;
pub mod exprtree;
pub mod mme;
pub mod rng;
pub mod surrogate;
pub mod swarmsim;
mod table;

pub use error::{Error, Result};

/// Shortest round-trip decimal text for a float, used in every text artifact.
pub fn fmt_num(v: f64) -> String {
    exprtree::format_number(v)
}
