//! Discovery (fit, match, label, save) and evaluation for every method.

use std::path::Path;

use crate::baselines::{external_dictionary_bank, kmeans_fit, nmf_fit, tcav_fit, varimax_fit};
use crate::cca::{concept_bank, fit_cca, ConceptBank, Provenance};
use crate::error::{Error, Result, StageExt};
use crate::linalg::EmbeddingMatrix;
use crate::matching::{apply_labels, class_prototypes, cosine_similarity_matrix, hungarian_assign};
use crate::metrics::{
    full_report, train_probe, Classifier, LogisticProbe, MetricsReport, ProbeConfig, ReportConfig,
    TextPrototypeClassifier,
};

use super::synth::Dataset;

/// Externally supplied concept embeddings, one per row, with their names.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub embeddings: EmbeddingMatrix,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DiscoveryOptions {
    pub method: Provenance,
    /// Concept count; `None` means `min(d, M)`. TCAV always learns `M`.
    pub k: Option<usize>,
    pub seed: u64,
    /// CCA ridge; `None` uses the trace-scaled default.
    pub ridge: Option<f64>,
    pub max_iter: usize,
    pub dictionary: Option<Dictionary>,
}

impl DiscoveryOptions {
    pub fn new(method: Provenance) -> Self {
        Self {
            method,
            k: None,
            seed: 0,
            ridge: None,
            max_iter: 500,
            dictionary: None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Fits the chosen method on `data` and labels its concepts. Fitted banks are
/// matched to classes by optimal assignment; TCAV and external banks keep the
/// labels they were built with.
pub fn discover(data: &Dataset, opts: &DiscoveryOptions) -> Result<ConceptBank> {
    let m = data.num_classes();
    let k = opts.k.unwrap_or_else(|| data.dim().min(m));
    let x = &data.images;
    let bank = match opts.method {
        Provenance::Scocca => {
            let model = fit_cca(x, &data.texts, k, opts.ridge).stage("fit")?;
            concept_bank(&model).stage("fit")?
        }
        Provenance::Varimax => varimax_fit(&x.centered(), k, opts.max_iter, 1e-10)
            .and_then(|v| v.bank(x.mean().to_vec()))
            .stage("fit")?,
        Provenance::Kmeans => kmeans_fit(&x.centered(), k, opts.max_iter, opts.seed)
            .and_then(|v| v.bank(x.mean().to_vec()))
            .stage("fit")?,
        Provenance::Nmf => nmf_fit(x.matrix(), k, opts.max_iter, opts.seed)
            .and_then(|v| v.bank())
            .stage("fit")?,
        Provenance::Tcav => {
            return tcav_fit(x, &data.labels, &data.class_names, opts.seed, 1e-4, 300).stage("fit")
        }
        Provenance::External => {
            let dict = opts.dictionary.as_ref().ok_or_else(|| {
                Error::Usage("method 'external' needs a dictionary of text embeddings".into())
            })?;
            if dict.embeddings.cols() != data.dim() {
                return Err(Error::Dimension(format!(
                    "{}-dimensional dictionary for {}-dimensional images",
                    dict.embeddings.cols(),
                    data.dim()
                ))
                .in_stage("fit"));
            }
            return external_dictionary_bank(
                &dict.embeddings,
                dict.labels.clone(),
                Some(x.mean().to_vec()),
            )
            .stage("fit");
        }
    };
    let protos =
        class_prototypes(x, &data.labels, &data.class_names, bank.mu_x()).stage("match")?;
    let s = cosine_similarity_matrix(&bank, &protos).stage("match")?;
    let assignment = hungarian_assign(&s);
    apply_labels(&bank, &assignment, &data.class_names).stage("label")
}

/// [`discover`], then writes the bank archive to `out`.
pub fn run_discovery(data: &Dataset, opts: &DiscoveryOptions, out: &Path) -> Result<ConceptBank> {
    let bank = discover(data, opts)?;
    super::archive::save_bank(out, &bank).stage("serialize")?;
    Ok(bank)
}

/// Which classifier scores the recomposed embeddings for zero-shot metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZeroShotMode {
    /// The trained linear probe.
    #[default]
    Probe,
    /// Cosine against class means of the training texts, at this temperature.
    TextPrototypes(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub report: ReportConfig,
    pub probe: ProbeConfig,
    pub zero_shot: ZeroShotMode,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Probe accuracy on the raw test embeddings.
    pub probe_accuracy: f64,
}

pub fn train_reference_probe(train: &Dataset, cfg: &ProbeConfig) -> Result<LogisticProbe> {
    train_probe(&train.images, &train.labels, train.num_classes(), cfg).stage("probe")
}

pub(crate) fn zero_shot_classifier(
    train: &Dataset,
    mode: ZeroShotMode,
) -> Result<Option<TextPrototypeClassifier>> {
    match mode {
        ZeroShotMode::Probe => Ok(None),
        ZeroShotMode::TextPrototypes(t) => TextPrototypeClassifier::new(
            &train.texts,
            &train.labels,
            &train.class_names,
            train.images.mean().to_vec(),
            t,
        )
        .map(Some)
        .stage("zero_shot"),
    }
}

/// Trains the probe on `train` and reports every metric on `test`.
pub fn evaluate(
    bank: &ConceptBank,
    train: &Dataset,
    test: &Dataset,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if train.class_names != test.class_names {
        return Err(Error::Label("train and test class lists differ".into()));
    }
    let probe = train_reference_probe(train, &opts.probe)?;
    evaluate_with_probe(bank, &probe, train, test, opts)
}

pub fn evaluate_with_probe(
    bank: &ConceptBank,
    probe: &LogisticProbe,
    train: &Dataset,
    test: &Dataset,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    let zs = zero_shot_classifier(train, opts.zero_shot)?;
    let report = full_report(
        bank,
        probe,
        &test.images,
        &test.labels,
        &test.class_names,
        &opts.report,
        zs.as_ref().map(|c| c as &dyn Classifier),
    )?;
    let probe_accuracy = probe
        .accuracy(test.images.matrix(), &test.labels)
        .stage("probe")?;
    Ok(Evaluation {
        report,
        probe_accuracy,
    })
}
