use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::EmbeddingMatrix;

/// Bank whose columns are externally supplied (text) embeddings.
///
/// `mu_x` is the mean subtracted before coding; zeros when not given.
pub fn external_dictionary_bank(
    t: &EmbeddingMatrix,
    labels: Vec<String>,
    mu_x: Option<Vec<f64>>,
) -> Result<ConceptBank> {
    if t.rows() == 0 {
        return Err(Error::Degenerate("dictionary is empty".into()));
    }
    if labels.len() != t.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} dictionary entries",
            labels.len(),
            t.rows()
        )));
    }
    let mu = mu_x.unwrap_or_else(|| vec![0.0; t.cols()]);
    ConceptBank::new(t.matrix().transpose(), mu, Provenance::External)?.with_labels(labels)
}
