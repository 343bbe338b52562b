//! λ and k ablations: zero-shot accuracy and code density across a grid.

use std::path::Path;

use serde::Serialize;

use crate::baselines::encode_batch;
use crate::cca::ConceptBank;
use crate::error::{Error, Result, StageExt};
use crate::metrics::{recompose_all, zero_shot_eval, Classifier, LogisticProbe};
use crate::sparse::LassoConfig;

use super::pipeline::{
    discover, train_reference_probe, zero_shot_classifier, DiscoveryOptions, EvalOptions,
};
use super::synth::Dataset;

/// Label of the unpenalized row in a λ sweep.
pub const BASELINE_LABEL: &str = "CoCCA baseline";

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Lambda(Vec<f64>),
    K(Vec<usize>),
}

impl SweepGrid {
    pub fn parameter(&self) -> &'static str {
        match self {
            SweepGrid::Lambda(_) => "lambda",
            SweepGrid::K(_) => "k",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepGrid::Lambda(g) => g.len(),
            SweepGrid::K(g) => g.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub label: String,
    pub zero_shot_accuracy: f64,
    /// Mean of `‖w‖₀ / k` over the evaluated rows.
    pub mean_l0_over_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub method: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Tab-separated with a header line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}\tlabel\tzero_shot_accuracy\tmean_l0_over_k\n",
            self.parameter
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\n",
                r.value, r.label, r.zero_shot_accuracy, r.mean_l0_over_k
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep table serializes")
    }

    /// Writes the text table to `path` and the JSON form next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.to_text().as_bytes())?;
        super::write_atomic(&path.with_extension("json"), self.to_json().as_bytes())
    }
}

fn grid_point(
    bank: &ConceptBank,
    lasso: &LassoConfig,
    test: &Dataset,
    h: &dyn Classifier,
) -> Result<(f64, f64)> {
    let codes = encode_batch(bank, &test.images, lasso).stage("decompose")?;
    let x_hat = recompose_all(bank, &codes)?;
    let (acc, _) = zero_shot_eval(h, &x_hat, &test.labels).stage("zero_shot")?;
    let k = bank.k() as f64;
    let density = codes.iter().map(|c| c.active_count as f64 / k).sum::<f64>() / codes.len() as f64;
    Ok((acc, density))
}

/// Runs discovery on `train` and scores `test` at every grid point. A λ grid
/// reuses one bank; a k grid refits per point at the configured λ.
pub fn run_sweep(
    train: &Dataset,
    test: &Dataset,
    discovery: &DiscoveryOptions,
    eval: &EvalOptions,
    grid: &SweepGrid,
    out: Option<&Path>,
) -> Result<SweepTable> {
    if grid.len() == 0 {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    let probe: LogisticProbe = train_reference_probe(train, &eval.probe)?;
    let zs = zero_shot_classifier(train, eval.zero_shot)?;
    let h: &dyn Classifier = match &zs {
        Some(c) => c,
        None => &probe,
    };
    let mut rows = Vec::with_capacity(grid.len());
    match grid {
        SweepGrid::Lambda(lambdas) => {
            let bank = discover(train, discovery)?;
            for &lambda in lambdas {
                let lasso = LassoConfig {
                    lambda,
                    ..eval.report.lasso
                };
                let (acc, density) = grid_point(&bank, &lasso, test, h)?;
                rows.push(SweepRow {
                    value: lambda,
                    label: if lambda == 0.0 {
                        BASELINE_LABEL.to_string()
                    } else {
                        format!("lambda={lambda}")
                    },
                    zero_shot_accuracy: acc,
                    mean_l0_over_k: density,
                });
            }
        }
        SweepGrid::K(ks) => {
            for &k in ks {
                let opts = DiscoveryOptions {
                    k: Some(k),
                    ..discovery.clone()
                };
                let bank = discover(train, &opts)?;
                let (acc, density) = grid_point(&bank, &eval.report.lasso, test, h)?;
                rows.push(SweepRow {
                    value: k as f64,
                    label: format!("k={k}"),
                    zero_shot_accuracy: acc,
                    mean_l0_over_k: density,
                });
            }
        }
    }
    let table = SweepTable {
        parameter: grid.parameter().to_string(),
        method: discovery.method.as_str().to_string(),
        rows,
    };
    if let Some(p) = out {
        table.save(p).stage("serialize")?;
    }
    Ok(table)
}
