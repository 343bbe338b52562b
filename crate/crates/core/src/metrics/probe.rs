//! Multinomial logistic regression trained by full-batch gradient descent.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, spectral_norm_sq, EmbeddingMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    /// Learning rate; `None` uses `1/L` for the loss's smoothness bound `L`.
    pub lr: Option<f64>,
    /// Weight on `½‖W‖_F²`.
    pub l2: f64,
    /// Subtract the training mean from features before the linear map.
    pub center: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: None,
            l2: 1e-4,
            center: true,
        }
    }
}

/// `h(x) = softmax(W(x − m) + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    /// `M × d`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub classes: usize,
    /// Loss before each epoch, then after the last one.
    pub training_loss_history: Vec<f64>,
    /// Feature offset `m` (zero when centering is off).
    pub feature_mean: Vec<f64>,
    pub l2: f64,
}

/// Loss value and its gradient with respect to `(W, b)`.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub grad_w: Matrix,
    pub grad_b: Vec<f64>,
}

impl LogisticProbe {
    /// A probe with all-zero parameters.
    pub fn zeros(classes: usize, d: usize, l2: f64) -> Self {
        Self {
            weights: Matrix::zeros(classes, d),
            bias: vec![0.0; classes],
            classes,
            training_loss_history: vec![],
            feature_mean: vec![0.0; d],
            l2,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let xc: Vec<f64> = x
            .iter()
            .zip(&self.feature_mean)
            .map(|(a, m)| a - m)
            .collect();
        (0..self.classes)
            .map(|c| dot(self.weights.row(c), &xc) + self.bias[c])
            .collect()
    }

    /// Class probabilities for one embedding.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "probe expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(softmax(&self.logits(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(ranked_classes(&self.predict_proba(x)?)[0])
    }

    /// Probabilities for every row, in row order.
    pub fn predict_proba_batch(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_proba(x.row(i)))
            .collect()
    }

    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let probs = self.predict_proba_batch(x)?;
        let hits = probs
            .iter()
            .zip(labels)
            .filter(|(p, &l)| ranked_classes(p)[0] == l)
            .count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    /// Mean cross-entropy plus `½·l2·‖W‖_F²`, with its analytic gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, labels: &[usize]) -> Result<LossGradient> {
        check_labels(x, labels, self.classes)?;
        let n = x.rows();
        let xc = centered(x, &self.feature_mean);
        // Residuals p − y per row, plus per-row cross-entropy.
        let rows: Vec<(Vec<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let z: Vec<f64> = (0..self.classes)
                    .map(|c| dot(self.weights.row(c), xc.row(i)) + self.bias[c])
                    .collect();
                let lse = log_sum_exp(&z);
                let mut r: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
                r[labels[i]] -= 1.0;
                (r, lse - z[labels[i]])
            })
            .collect();
        let inv_n = 1.0 / n as f64;
        let mut ce = 0.0;
        let mut resid = Vec::with_capacity(n * self.classes);
        let mut grad_b = vec![0.0; self.classes];
        for (r, l) in &rows {
            ce += l;
            for (g, v) in grad_b.iter_mut().zip(r) {
                *g += v;
            }
            resid.extend_from_slice(r);
        }
        grad_b.iter_mut().for_each(|g| *g *= inv_n);
        let resid = Matrix::from_raw(n, self.classes, resid);
        let grad_w = resid
            .t_matmul(&xc)?
            .scale(inv_n)
            .add(&self.weights.scale(self.l2))?;
        let penalty = 0.5 * self.l2 * self.weights.frobenius_norm().powi(2);
        Ok(LossGradient {
            loss: ce * inv_n + penalty,
            grad_w,
            grad_b,
        })
    }
}

fn check_labels(x: &Matrix, labels: &[usize], classes: usize) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} rows",
            labels.len(),
            x.rows()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Dimension("no training rows".into()));
    }
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::Label(format!(
            "row {i} has label {l}, only {classes} classes"
        )));
    }
    Ok(())
}

fn centered(x: &Matrix, mean: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    out
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Class indices by descending probability, ties to the lower index.
pub fn ranked_classes(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx
}

/// Smoothness bound of the training loss: the softmax cross-entropy Hessian in
/// the logits is at most `½·I`, so `L ≤ ½·λ_max(X̃ᵀX̃/n) + l2`, where `X̃`
/// carries a ones column for the bias.
fn smoothness_bound(xc: &Matrix, l2: f64) -> Result<f64> {
    let (n, d) = xc.shape();
    let aug = Matrix::from_fn(n, d + 1, |i, j| if j < d { xc.get(i, j) } else { 1.0 });
    let s = match spectral_norm_sq(&aug, 1e-6, 5_000) {
        Ok(s) => s,
        Err(Error::Convergence { estimate, .. }) => estimate,
        Err(e) => return Err(e),
    };
    // Power iteration approaches from below; pad slightly so the step stays safe.
    Ok(0.5 * 1.01 * s / n as f64 + l2)
}

pub fn train_probe(
    x: &EmbeddingMatrix,
    labels: &[usize],
    classes: usize,
    cfg: &ProbeConfig,
) -> Result<LogisticProbe> {
    if classes < 2 {
        return Err(Error::Parameter(format!(
            "probe needs at least 2 classes, got {classes}"
        )));
    }
    if !(cfg.l2 >= 0.0) {
        return Err(Error::Parameter(format!("l2 must be >= 0, got {}", cfg.l2)));
    }
    check_labels(x.matrix(), labels, classes)?;
    let d = x.cols();
    let mut probe = LogisticProbe::zeros(classes, d, cfg.l2);
    if cfg.center {
        probe.feature_mean = x.mean().to_vec();
    }
    let lr = match cfg.lr {
        Some(lr) if lr > 0.0 => lr,
        Some(lr) => {
            return Err(Error::Parameter(format!(
                "learning rate must be > 0, got {lr}"
            )))
        }
        None => 1.0 / smoothness_bound(&centered(x.matrix(), &probe.feature_mean), cfg.l2)?,
    };

    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let lg = probe.loss_and_gradient(x.matrix(), labels)?;
        if !lg.loss.is_finite() {
            return Err(Error::Training(format!(
                "loss became {} at epoch {epoch}; try a smaller learning rate",
                lg.loss
            )));
        }
        history.push(lg.loss);
        if epoch == cfg.epochs {
            break;
        }
        probe.weights = probe.weights.sub(&lg.grad_w.scale(lr))?;
        for (b, g) in probe.bias.iter_mut().zip(&lg.grad_b) {
            *b -= lr * g;
        }
        if probe.weights.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "weights diverged at epoch {epoch}; try a smaller learning rate"
            )));
        }
    }
    probe.training_loss_history = history;
    Ok(probe)
}
