//! Purity and editing metrics: probability drop under ablation, probability
//! gain under insertion, and residual cosine.

use crate::cca::ConceptBank;
use crate::concepts::{ablate, insert_with, recompose, InsertMode};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, EmbeddingMatrix, Matrix};
use crate::matching::PrototypeSet;
use crate::sparse::SparseCode;

use super::probe::{ranked_classes, softmax, LogisticProbe};

/// Anything that maps an embedding to class probabilities.
pub trait Classifier: Sync {
    fn classes(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Classifier for LogisticProbe {
    fn classes(&self) -> usize {
        self.classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        LogisticProbe::predict_proba(self, x)
    }
}

/// Zero-shot style classifier: softmax over cosines between the centered image
/// embedding and unit text prototypes.
#[derive(Debug, Clone)]
pub struct TextPrototypeClassifier {
    /// Unit-norm class prototypes, one per row.
    pub prototypes: Matrix,
    pub image_mean: Vec<f64>,
    pub temperature: f64,
}

impl TextPrototypeClassifier {
    /// Prototypes are class means of `texts` centered by the text mean.
    pub fn new(
        texts: &EmbeddingMatrix,
        labels: &[usize],
        class_names: &[String],
        image_mean: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Parameter(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        let protos = crate::matching::class_prototypes(texts, labels, class_names, texts.mean())?;
        let rows = (0..protos.len())
            .map(|j| protos.unit_prototype(j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            prototypes: Matrix::from_rows(&rows)?,
            image_mean,
            temperature,
        })
    }
}

impl Classifier for TextPrototypeClassifier {
    fn classes(&self) -> usize {
        self.prototypes.rows()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.prototypes.cols() {
            return Err(Error::Dimension(format!(
                "classifier expects {} features, got {}",
                self.prototypes.cols(),
                x.len()
            )));
        }
        let xc: Vec<f64> = x.iter().zip(&self.image_mean).map(|(a, m)| a - m).collect();
        let n = norm2(&xc);
        let z: Vec<f64> = (0..self.classes())
            .map(|j| {
                let c = if n == 0.0 {
                    0.0
                } else {
                    dot(self.prototypes.row(j), &xc) / n
                };
                c / self.temperature
            })
            .collect();
        Ok(softmax(&z))
    }
}

/// Concept index carrying the name of class `class`.
pub fn concept_for_class(
    bank: &ConceptBank,
    class: usize,
    class_names: &[String],
) -> Result<usize> {
    let name = class_names
        .get(class)
        .ok_or_else(|| Error::Label(format!("class index {class} has no name")))?;
    bank.concept_for_label(name)
        .ok_or_else(|| Error::Unassigned(name.clone()))
}

/// `h(x)_i − h(x̂*)_i` where `x̂*` recomposes the code with class `i`'s concept ablated.
pub fn ablation_prob_drop(
    h: &dyn Classifier,
    bank: &ConceptBank,
    x: &[f64],
    code: &SparseCode,
    class_i: usize,
    class_names: &[String],
) -> Result<f64> {
    let ci = concept_for_class(bank, class_i, class_names)?;
    let edited = recompose(bank, &ablate(code, ci)?)?;
    Ok(h.predict_proba(x)?[class_i] - h.predict_proba(&edited)?[class_i])
}

/// `h(x̂*)_j − h(x)_j` where `x̂*` moves class `i`'s coefficient onto class `j`'s concept.
#[allow(clippy::too_many_arguments)]
pub fn target_prob_gain(
    h: &dyn Classifier,
    bank: &ConceptBank,
    x: &[f64],
    code: &SparseCode,
    class_i: usize,
    class_j: usize,
    class_names: &[String],
    mode: InsertMode,
) -> Result<f64> {
    let edited = inserted_embedding(bank, code, class_i, class_j, class_names, mode)?;
    Ok(h.predict_proba(&edited)?[class_j] - h.predict_proba(x)?[class_j])
}

/// Recomposed embedding after `insert(concept(i) → concept(j))`.
pub fn inserted_embedding(
    bank: &ConceptBank,
    code: &SparseCode,
    class_i: usize,
    class_j: usize,
    class_names: &[String],
    mode: InsertMode,
) -> Result<Vec<f64>> {
    if class_i == class_j {
        return Err(Error::Parameter(format!(
            "source and target class are both {class_i}"
        )));
    }
    let ci = concept_for_class(bank, class_i, class_names)?;
    let cj = concept_for_class(bank, class_j, class_names)?;
    recompose(bank, &insert_with(code, ci, cj, mode)?)
}

/// Cosine between `x − ⟨x, μ_i⟩μ_i` and `x_edit − ⟨x_edit, μ_j⟩μ_j`.
pub fn residual_cosine(x: &[f64], x_edit: &[f64], mu_i: &[f64], mu_j: &[f64]) -> Result<f64> {
    for (name, mu) in [("mu_i", mu_i), ("mu_j", mu_j)] {
        if (norm2(mu) - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("{name} must have unit norm")));
        }
    }
    let d = x.len();
    if x_edit.len() != d || mu_i.len() != d || mu_j.len() != d {
        return Err(Error::Dimension(
            "residual cosine inputs differ in length".into(),
        ));
    }
    let ri = reject(x, mu_i);
    let rj = reject(x_edit, mu_j);
    let (ni, nj) = (norm2(&ri), norm2(&rj));
    if ni == 0.0 || nj == 0.0 {
        return Err(Error::Degenerate("residual is zero".into()));
    }
    Ok((dot(&ri, &rj) / (ni * nj)).clamp(-1.0, 1.0))
}

fn reject(x: &[f64], unit: &[f64]) -> Vec<f64> {
    let p = dot(x, unit);
    x.iter().zip(unit).map(|(a, u)| a - p * u).collect()
}

/// Top-1 accuracy and top-5 hit rate of `h` on the given rows.
pub fn zero_shot_eval(h: &dyn Classifier, x_hat: &Matrix, labels: &[usize]) -> Result<(f64, f64)> {
    use rayon::prelude::*;
    if labels.len() != x_hat.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} rows",
            labels.len(),
            x_hat.rows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Dimension("zero-shot evaluation on no rows".into()));
    }
    let hits: Vec<(bool, bool)> = (0..x_hat.rows())
        .into_par_iter()
        .map(|i| {
            let ranked = ranked_classes(&h.predict_proba(x_hat.row(i))?);
            Ok((
                ranked[0] == labels[i],
                ranked.iter().take(5).any(|&c| c == labels[i]),
            ))
        })
        .collect::<Result<_>>()?;
    let n = labels.len() as f64;
    let top1 = hits.iter().filter(|h| h.0).count() as f64 / n;
    let top5 = hits.iter().filter(|h| h.1).count() as f64 / n;
    Ok((top1, top5))
}

/// Unit prototypes for every class, used as `μ_i` in the residual cosine.
pub fn unit_prototypes(protos: &PrototypeSet) -> Result<Vec<Vec<f64>>> {
    (0..protos.len())
        .map(|j| protos.unit_prototype(j))
        .collect()
}
