//! Evaluation: the logistic probe, purity and editing, sparsity and
//! reconstruction metrics, and the combined report.

mod probe;
mod purity;
mod reconstruction;
mod report;
mod sparsity;

pub use probe::{ranked_classes, softmax, train_probe, LogisticProbe, LossGradient, ProbeConfig};
pub use purity::{
    ablation_prob_drop, concept_for_class, inserted_embedding, residual_cosine, target_prob_gain,
    unit_prototypes, zero_shot_eval, Classifier, TextPrototypeClassifier,
};
pub use reconstruction::reconstruction_metrics;
pub(crate) use report::recompose_all;
pub use report::{
    full_report, sample_pair_classes, MetricsReport, ReportConfig, METRIC_KEYS, PURITY_EDITING,
    RECONSTRUCTION, SPARSITY,
};
pub use sparsity::{concept_orthogonality, energy_coverage_at, hoyer_sparsity};
