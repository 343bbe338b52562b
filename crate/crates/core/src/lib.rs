//! Sparse concept discovery and decomposition for paired image/text embeddings.
//!
//! A concept dictionary is learned in closed form with canonical correlation
//! analysis, grounded with class labels through an optimal assignment, and used
//! to decompose embeddings into sparse Lasso codes that can be edited and
//! recomposed. Baseline dictionaries and an evaluation suite are included.

pub mod baselines;
pub mod cca;
pub mod concepts;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matching;
pub mod metrics;
pub mod rng;
pub mod sparse;

pub use cca::{ConceptBank, Provenance};
pub use error::{Error, Result};
pub use linalg::{EmbeddingMatrix, Matrix};
pub use sparse::{LassoConfig, SparseCode};
