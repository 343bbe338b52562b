use rand::seq::index::sample;
use rayon::prelude::*;

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{norm2, EmbeddingMatrix, Matrix};
use crate::metrics::{train_probe, ProbeConfig};
use crate::rng;

/// One concept activation vector per class: the unit normal of a logistic
/// separator between the class and an equal-sized random sample of other rows.
///
/// Column `c` of the bank is labeled `class_names[c]`.
pub fn tcav_fit(
    x: &EmbeddingMatrix,
    labels: &[usize],
    class_names: &[String],
    seed: u64,
    l2: f64,
    epochs: usize,
) -> Result<ConceptBank> {
    let m = class_names.len();
    if labels.len() != x.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} rows",
            labels.len(),
            x.rows()
        )));
    }
    let cfg = ProbeConfig {
        epochs,
        lr: None,
        l2,
        center: true,
    };
    let cavs = (0..m)
        .into_par_iter()
        .map(|c| class_cav(x, labels, c, seed, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let bank = ConceptBank::new(
        Matrix::from_columns(&cavs)?,
        x.mean().to_vec(),
        Provenance::Tcav,
    )?;
    bank.with_labels(class_names.to_vec())
}

fn class_cav(
    x: &EmbeddingMatrix,
    labels: &[usize],
    class: usize,
    seed: u64,
    cfg: &ProbeConfig,
) -> Result<Vec<f64>> {
    let pos: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == class).collect();
    if pos.is_empty() {
        return Err(Error::MissingClass { class });
    }
    let others: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] != class).collect();
    if others.is_empty() {
        return Err(Error::Degenerate(format!("class {class} has no negatives")));
    }
    let count = pos.len().min(others.len());
    let mut r = rng::stream(seed, &format!("tcav.negatives.{class}"));
    let mut neg: Vec<usize> = sample(&mut r, others.len(), count)
        .into_iter()
        .map(|i| others[i])
        .collect();
    neg.sort_unstable();

    let rows: Vec<usize> = neg.iter().chain(&pos).copied().collect();
    let y: Vec<usize> = (0..rows.len())
        .map(|i| usize::from(i >= neg.len()))
        .collect();
    let probe = train_probe(&x.select_rows(&rows), &y, 2, cfg)?;
    let dir: Vec<f64> = probe
        .weights
        .row(1)
        .iter()
        .zip(probe.weights.row(0))
        .map(|(a, b)| a - b)
        .collect();
    let n = norm2(&dir);
    if n == 0.0 {
        return Err(Error::Degenerate(format!(
            "separator for class {class} has zero normal"
        )));
    }
    Ok(dir.into_iter().map(|v| v / n).collect())
}
