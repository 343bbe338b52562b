//! Comparison dictionaries: K-Means, NMF, Varimax, TCAV and a fixed external
//! dictionary, plus the coder each bank type uses.

mod external;
mod kmeans;
mod nmf;
mod tcav;
mod varimax;

pub use external::external_dictionary_bank;
pub use kmeans::{kmeans_code, kmeans_fit, KMeansModel};
pub use nmf::{nmf_code, nmf_fit, NmfModel};
pub use tcav::tcav_fit;
pub use varimax::{varimax_criterion, varimax_fit, VarimaxModel};

use rayon::prelude::*;

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::EmbeddingMatrix;
use crate::sparse::{LassoConfig, LassoSolver, SparseCode};

/// Codes every row the way the bank's method prescribes: nearest centroid for
/// K-Means, nonnegative least squares for NMF, Lasso for everything else.
pub fn encode_batch(
    bank: &ConceptBank,
    x: &EmbeddingMatrix,
    cfg: &LassoConfig,
) -> Result<Vec<SparseCode>> {
    if x.cols() != bank.d() {
        return Err(Error::Dimension(format!(
            "{}-dimensional embeddings for a {}-dimensional bank",
            x.cols(),
            bank.d()
        )));
    }
    let rows = 0..x.rows();
    match bank.provenance() {
        Provenance::Kmeans => {
            let centroids = bank.c().transpose();
            rows.into_par_iter()
                .map(|i| kmeans_code(&centroids, &bank.center(x.row(i))?).map_err(|e| e.at_row(i)))
                .collect()
        }
        Provenance::Nmf => {
            cfg.validate()?;
            rows.into_par_iter()
                .map(|i| {
                    nmf_code(bank.c(), &bank.center(x.row(i))?, cfg.max_iter, cfg.tol)
                        .map_err(|e| e.at_row(i))
                })
                .collect()
        }
        _ => {
            let solver = LassoSolver::new(bank, *cfg)?;
            rows.into_par_iter()
                .map(|i| solver.solve(x.row(i)).map_err(|e| e.at_row(i)))
                .collect()
        }
    }
}

/// Single-row form of [`encode_batch`].
pub fn encode(bank: &ConceptBank, x: &[f64], cfg: &LassoConfig) -> Result<SparseCode> {
    let m = EmbeddingMatrix::new(crate::linalg::Matrix::new(1, x.len(), x.to_vec())?);
    Ok(encode_batch(bank, &m, cfg)?.remove(0))
}
