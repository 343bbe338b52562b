use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::encode_batch;
use crate::cca::ConceptBank;
use crate::concepts::{recompose, InsertMode};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{EmbeddingMatrix, Matrix};
use crate::rng;
use crate::sparse::{LassoConfig, SparseCode};

use super::purity::{
    ablation_prob_drop, concept_for_class, inserted_embedding, residual_cosine, zero_shot_eval,
    Classifier,
};
use super::reconstruction::reconstruction_metrics;
use super::sparsity::{concept_orthogonality, energy_coverage_at, hoyer_sparsity};

pub const PURITY_EDITING: &str = "purity_editing";
pub const SPARSITY: &str = "sparsity";
pub const RECONSTRUCTION: &str = "reconstruction";

/// Every metric key the report emits, as `(category, metric)`.
pub const METRIC_KEYS: [(&str, &str); 10] = [
    (PURITY_EDITING, "ablation_prob_drop"),
    (PURITY_EDITING, "target_prob_gain"),
    (PURITY_EDITING, "img_residual_cosine"),
    (PURITY_EDITING, "zero_shot_accuracy"),
    (PURITY_EDITING, "zero_shot_precision_at_5"),
    (SPARSITY, "concept_orthogonality"),
    (SPARSITY, "energy_coverage_at_10"),
    (SPARSITY, "hoyer_sparsity"),
    (RECONSTRUCTION, "cosine_similarity"),
    (RECONSTRUCTION, "relative_l2_error"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    /// Category → metric → value.
    pub groups: BTreeMap<String, BTreeMap<String, f64>>,
    /// Number of samples (or pairs) behind each metric.
    pub counts: BTreeMap<String, usize>,
}

impl MetricsReport {
    pub fn new(method: &str, seed: u64) -> Self {
        Self {
            method: method.to_string(),
            seed,
            groups: BTreeMap::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, category: &str, metric: &str, value: f64, count: usize) {
        self.groups
            .entry(category.to_string())
            .or_default()
            .insert(metric.to_string(), value);
        self.counts.insert(metric.to_string(), count);
    }

    pub fn get(&self, category: &str, metric: &str) -> Option<f64> {
        self.groups.get(category)?.get(metric).copied()
    }

    /// One `category.metric = value` line per metric, then counts and metadata.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (cat, metrics) in &self.groups {
            for (name, v) in metrics {
                let _ = writeln!(out, "{cat}.{name} = {v}");
            }
        }
        for (name, n) in &self.counts {
            let _ = writeln!(out, "counts.{name} = {n}");
        }
        let _ = writeln!(out, "meta.method = {}", self.method);
        let _ = writeln!(out, "meta.seed = {}", self.seed);
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub lasso: LassoConfig,
    /// Share of classes drawn for the pairwise metrics.
    pub pair_fraction: f64,
    pub seed: u64,
    pub insert_mode: InsertMode,
    pub energy_top: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            lasso: LassoConfig::default(),
            pair_fraction: 0.15,
            seed: 0,
            insert_mode: InsertMode::Additive,
            energy_top: 10,
        }
    }
}

/// Classes drawn for the pairwise metrics: `round(fraction·M)` (at least 2)
/// among those with an assigned concept, in ascending order.
pub fn sample_pair_classes(
    bank: &ConceptBank,
    class_names: &[String],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    sample_among(bank, class_names, fraction, seed, |_| true)
}

fn sample_among(
    bank: &ConceptBank,
    class_names: &[String],
    fraction: f64,
    seed: u64,
    keep: impl Fn(usize) -> bool,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "pair fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut eligible: Vec<usize> = (0..class_names.len())
        .filter(|&c| keep(c) && concept_for_class(bank, c, class_names).is_ok())
        .collect();
    if eligible.len() < 2 {
        return Err(Error::Unassigned(
            "fewer than two classes have concepts; pairwise metrics need two".into(),
        ));
    }
    let want = ((fraction * class_names.len() as f64).round() as usize)
        .max(2)
        .min(eligible.len());
    eligible.shuffle(&mut rng::stream(seed, "report.pair_classes"));
    let mut chosen = eligible[..want].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// The full evaluation suite for one bank on held-out embeddings.
///
/// `zero_shot` replaces the probe for the zero-shot rows when given.
#[allow(clippy::too_many_arguments)]
pub fn full_report(
    bank: &ConceptBank,
    probe: &dyn Classifier,
    x_test: &EmbeddingMatrix,
    labels: &[usize],
    class_names: &[String],
    cfg: &ReportConfig,
    zero_shot: Option<&dyn Classifier>,
) -> Result<MetricsReport> {
    if labels.len() != x_test.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} rows",
            labels.len(),
            x_test.rows()
        )));
    }
    let mut report = MetricsReport::new(bank.provenance().as_str(), cfg.seed);
    let codes = encode_batch(bank, x_test, &cfg.lasso).stage("decompose")?;
    let x_hat = recompose_all(bank, &codes)?;

    let (rel, cos) = reconstruction_metrics(x_test.matrix(), &x_hat).stage("reconstruction")?;
    let n = x_test.rows();
    report.insert(RECONSTRUCTION, "relative_l2_error", rel, n);
    report.insert(RECONSTRUCTION, "cosine_similarity", cos, n);

    let (acc, p5) =
        zero_shot_eval(zero_shot.unwrap_or(probe), &x_hat, labels).stage("zero_shot")?;
    report.insert(PURITY_EDITING, "zero_shot_accuracy", acc, n);
    report.insert(PURITY_EDITING, "zero_shot_precision_at_5", p5, n);

    let (drop, drop_n) = mean_ablation_drop(probe, bank, x_test, &codes, labels, class_names)
        .stage("ablation_prob_drop")?;
    report.insert(PURITY_EDITING, "ablation_prob_drop", drop, drop_n);

    // Only classes present in the evaluation rows can be edited.
    let mut present = vec![false; class_names.len()];
    for &l in labels {
        if let Some(p) = present.get_mut(l) {
            *p = true;
        }
    }
    let pair_classes = sample_among(bank, class_names, cfg.pair_fraction, cfg.seed, |c| {
        present[c]
    })
    .stage("pair_sampling")?;
    let (gain, resid, pairs) = pair_metrics(
        probe,
        bank,
        x_test,
        &codes,
        labels,
        class_names,
        &pair_classes,
        cfg,
    )?;
    report.insert(PURITY_EDITING, "target_prob_gain", gain, pairs);
    report.insert(PURITY_EDITING, "img_residual_cosine", resid, pairs);

    report.insert(
        SPARSITY,
        "concept_orthogonality",
        concept_orthogonality(bank).stage("concept_orthogonality")?,
        bank.k(),
    );
    report.insert(
        SPARSITY,
        "energy_coverage_at_10",
        energy_coverage_at(&codes, bank, cfg.energy_top).stage("energy_coverage")?,
        n,
    );
    let (hoyer, hoyer_n) = mean_hoyer(&codes).stage("hoyer_sparsity")?;
    report.insert(SPARSITY, "hoyer_sparsity", hoyer, hoyer_n);
    report
        .counts
        .insert("pair_classes".into(), pair_classes.len());
    Ok(report)
}

pub(crate) fn recompose_all(bank: &ConceptBank, codes: &[SparseCode]) -> Result<Matrix> {
    let rows = codes
        .par_iter()
        .map(|c| recompose(bank, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_raw(
        rows.len(),
        bank.d(),
        rows.into_iter().flatten().collect(),
    ))
}

/// Mean drop over rows whose class has a concept, and how many rows that is.
fn mean_ablation_drop(
    probe: &dyn Classifier,
    bank: &ConceptBank,
    x: &EmbeddingMatrix,
    codes: &[SparseCode],
    labels: &[usize],
    class_names: &[String],
) -> Result<(f64, usize)> {
    let drops: Vec<Option<f64>> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            if concept_for_class(bank, labels[i], class_names).is_err() {
                return Ok(None);
            }
            ablation_prob_drop(probe, bank, x.row(i), &codes[i], labels[i], class_names)
                .map(Some)
                .map_err(|e| e.at_row(i))
        })
        .collect::<Result<_>>()?;
    let vals: Vec<f64> = drops.into_iter().flatten().collect();
    if vals.is_empty() {
        return Err(Error::Unassigned("no test class has a concept".into()));
    }
    Ok((vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
}

/// Mean target-probability gain and residual cosine over ordered class pairs.
/// Each pair contributes the mean over test rows of its source class.
#[allow(clippy::too_many_arguments)]
fn pair_metrics(
    probe: &dyn Classifier,
    bank: &ConceptBank,
    x: &EmbeddingMatrix,
    codes: &[SparseCode],
    labels: &[usize],
    class_names: &[String],
    classes: &[usize],
    cfg: &ReportConfig,
) -> Result<(f64, f64, usize)> {
    // Residuals are taken on embeddings centered by the evaluation mean.
    let mu = x.mean().to_vec();
    let mut units: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &c in classes {
        units.insert(
            c,
            unit_class_mean(x, labels, c, &mu).stage("img_residual_cosine")?,
        );
    }
    let center = |v: &[f64]| -> Vec<f64> { v.iter().zip(&mu).map(|(a, m)| a - m).collect() };

    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .flat_map(|&i| {
            classes
                .iter()
                .filter(move |&&j| j != i)
                .map(move |&j| (i, j))
        })
        .collect();
    let per_pair: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(ci, cj)| {
            let rows: Vec<usize> = (0..x.rows()).filter(|&r| labels[r] == ci).collect();
            let mut gain = 0.0;
            let mut resid = 0.0;
            for &r in &rows {
                let xr = x.row(r);
                let edited =
                    inserted_embedding(bank, &codes[r], ci, cj, class_names, cfg.insert_mode)
                        .stage("target_prob_gain")?;
                gain += probe.predict_proba(&edited)?[cj] - probe.predict_proba(xr)?[cj];
                resid += residual_cosine(&center(xr), &center(&edited), &units[&ci], &units[&cj])
                    .map_err(|e| e.at_row(r))
                    .stage("img_residual_cosine")?;
            }
            let m = rows.len() as f64;
            Ok((gain / m, resid / m))
        })
        .collect::<Result<_>>()?;
    let np = per_pair.len() as f64;
    let gain = per_pair.iter().map(|p| p.0).sum::<f64>() / np;
    let resid = per_pair.iter().map(|p| p.1).sum::<f64>() / np;
    Ok((gain, resid, per_pair.len()))
}

/// Unit-norm mean of the rows labeled `class`, centered by `mu`.
fn unit_class_mean(
    x: &EmbeddingMatrix,
    labels: &[usize],
    class: usize,
    mu: &[f64],
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; x.cols()];
    let mut n = 0usize;
    for (r, _) in labels.iter().enumerate().filter(|(_, &l)| l == class) {
        for ((s, v), m) in sum.iter_mut().zip(x.row(r)).zip(mu) {
            *s += v - m;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::MissingClass { class });
    }
    let norm = crate::linalg::norm2(&sum);
    if norm == 0.0 {
        return Err(Error::Degenerate(format!(
            "centered mean of class {class} is zero"
        )));
    }
    Ok(sum.into_iter().map(|v| v / norm).collect())
}

/// Mean Hoyer index over nonzero codes; 1 when every code is zero.
fn mean_hoyer(codes: &[SparseCode]) -> Result<(f64, usize)> {
    let vals = codes
        .iter()
        .filter(|c| c.w.iter().any(|&v| v != 0.0))
        .map(|c| hoyer_sparsity(&c.w))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        return Ok((1.0, 0));
    }
    Ok((vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
}
