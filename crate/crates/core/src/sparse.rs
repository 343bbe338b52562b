//! Lasso sparse coding against a fixed dictionary with ISTA.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::ConceptBank;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, spectral_norm_sq, sym_eig, EmbeddingMatrix, Matrix};

/// Guard for the relative-change denominator.
const REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative iterate change below which iteration stops.
    pub tol: f64,
    /// Step size override; `None` uses `1/‖C‖₂²`.
    pub step: Option<f64>,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iter: 10_000,
            tol: 1e-6,
            step: None,
        }
    }
}

impl LassoConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be at least 1".into()));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Parameter(format!("step must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Concept coefficients for one embedding with solver diagnostics.
///
/// Edited codes keep the diagnostics of the solve they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    pub w: Vec<f64>,
    pub iterations: usize,
    /// `½‖Cw − x̄‖² + λ‖w‖₁` at the returned `w`.
    pub objective: f64,
    pub converged: bool,
    pub active_count: usize,
}

impl SparseCode {
    /// A code not produced by an iterative solve.
    pub fn from_coefficients(w: Vec<f64>) -> Self {
        let active_count = count_active(&w);
        Self {
            w,
            iterations: 0,
            objective: f64::NAN,
            converged: true,
            active_count,
        }
    }

    pub(crate) fn with_w(&self, w: Vec<f64>) -> Self {
        Self {
            active_count: count_active(&w),
            w,
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }
}

fn count_active(w: &[f64]) -> usize {
    w.iter().filter(|v| v.abs() > 0.0).count()
}

/// `sign(y)·max(|y| − τ, 0)` per entry.
pub fn soft_threshold(y: &[f64], tau: f64) -> Vec<f64> {
    y.iter().map(|&v| shrink(v, tau)).collect()
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `½‖Cw − x̄‖² + λ‖w‖₁`.
pub fn lasso_objective(c: &Matrix, xbar: &[f64], w: &[f64], lambda: f64) -> f64 {
    let r = residual(c, xbar, w);
    0.5 * dot(&r, &r) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn residual(c: &Matrix, xbar: &[f64], w: &[f64]) -> Vec<f64> {
    let mut r = c.matvec(w).expect("code length matches dictionary");
    for (ri, xi) in r.iter_mut().zip(xbar) {
        *ri -= xi;
    }
    r
}

/// ISTA solver with the step size and Gram matrix precomputed for a bank.
#[derive(Debug, Clone)]
pub struct LassoSolver<'a> {
    bank: &'a ConceptBank,
    cfg: LassoConfig,
    gram: Matrix,
    step: f64,
}

impl<'a> LassoSolver<'a> {
    pub fn new(bank: &'a ConceptBank, cfg: LassoConfig) -> Result<Self> {
        cfg.validate()?;
        let c = bank.c();
        let gram = c.t_matmul(c)?;
        let step = match cfg.step {
            Some(s) => s,
            None => {
                let l = lipschitz(c, &gram)?;
                if !(l > 0.0) {
                    return Err(Error::Degenerate("dictionary is zero".into()));
                }
                1.0 / l
            }
        };
        Ok(Self {
            bank,
            cfg,
            gram,
            step,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn config(&self) -> &LassoConfig {
        &self.cfg
    }

    pub fn solve(&self, x: &[f64]) -> Result<SparseCode> {
        self.run(x, false).map(|(code, _)| code)
    }

    /// Solves and also returns `F(w^t)` for `t = 0, 1, …` (starting at `w⁰ = 0`).
    pub fn solve_traced(&self, x: &[f64]) -> Result<(SparseCode, Vec<f64>)> {
        self.run(x, true)
    }

    fn run(&self, x: &[f64], trace: bool) -> Result<(SparseCode, Vec<f64>)> {
        let xbar = self.bank.center(x)?;
        let c = self.bank.c();
        let k = self.bank.k();
        let b = c.t_matvec(&xbar)?;
        let lambda = self.cfg.lambda;
        let thresh = self.step * lambda;

        let mut w = vec![0.0; k];
        let mut history = Vec::new();
        if trace {
            history.push(lasso_objective(c, &xbar, &w, lambda));
        }
        let mut next = vec![0.0; k];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.cfg.max_iter {
            iterations += 1;
            // Gradient Cᵀ(Cw − x̄) = Gw − Cᵀx̄.
            for (i, n) in next.iter_mut().enumerate() {
                let g = dot(self.gram.row(i), &w) - b[i];
                *n = shrink(w[i] - self.step * g, thresh);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite coefficient at iteration {iterations}"
                )));
            }
            let delta = next
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale = norm2(&w).max(REL_EPS);
            std::mem::swap(&mut w, &mut next);
            if trace {
                history.push(lasso_objective(c, &xbar, &w, lambda));
            }
            if delta / scale < self.cfg.tol {
                converged = true;
                break;
            }
        }
        let objective = lasso_objective(c, &xbar, &w, lambda);
        let active_count = count_active(&w);
        Ok((
            SparseCode {
                w,
                iterations,
                objective,
                converged,
                active_count,
            },
            history,
        ))
    }
}

/// `‖C‖₂²` by power iteration, falling back to the Gram spectrum when the
/// iteration stalls on a near-degenerate top pair.
fn lipschitz(c: &Matrix, gram: &Matrix) -> Result<f64> {
    match spectral_norm_sq(c, 1e-12, 20_000) {
        Ok(l) => Ok(l),
        Err(Error::Convergence { .. }) => Ok(sym_eig(gram)?.eigenvalues[0].max(0.0)),
        Err(e) => Err(e),
    }
}

/// Single-embedding Lasso code of `x` (raw, uncentered) against `bank`.
pub fn lasso_ista(bank: &ConceptBank, x: &[f64], cfg: &LassoConfig) -> Result<SparseCode> {
    LassoSolver::new(bank, *cfg)?.solve(x)
}

/// Codes for every row, in row order. Rows are solved in parallel.
pub fn decompose_batch(
    bank: &ConceptBank,
    x: &EmbeddingMatrix,
    cfg: &LassoConfig,
) -> Result<Vec<SparseCode>> {
    let solver = LassoSolver::new(bank, *cfg)?;
    if x.cols() != bank.d() {
        return Err(Error::Dimension(format!(
            "{}-dimensional embeddings for a {}-dimensional bank",
            x.cols(),
            bank.d()
        )));
    }
    (0..x.rows())
        .into_par_iter()
        .map(|i| solver.solve(x.row(i)).map_err(|e| e.at_row(i)))
        .collect()
}

/// Per-coordinate optimality certificate for a Lasso code.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub max_violation: f64,
    /// Coordinates whose violation exceeds the tolerance.
    pub violations: Vec<usize>,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// With `g = Cᵀ(Cw − x̄)`: active coordinates need `|g_i + λ·sign(w_i)| ≤ tol`,
/// inactive ones `|g_i| ≤ λ + tol`.
pub fn check_kkt(
    bank: &ConceptBank,
    x: &[f64],
    code: &SparseCode,
    lambda: f64,
    tol: f64,
) -> Result<KktReport> {
    if code.w.len() != bank.k() {
        return Err(Error::Dimension(format!(
            "code of length {} for {} concepts",
            code.w.len(),
            bank.k()
        )));
    }
    let xbar = bank.center(x)?;
    let r = residual(bank.c(), &xbar, &code.w);
    let g = bank.c().t_matvec(&r)?;
    let mut max_violation: f64 = 0.0;
    let mut violations = Vec::new();
    for (i, (&gi, &wi)) in g.iter().zip(&code.w).enumerate() {
        let v = if wi != 0.0 {
            (gi + lambda * wi.signum()).abs()
        } else {
            (gi.abs() - lambda).max(0.0)
        };
        max_violation = max_violation.max(v);
        if v > tol {
            violations.push(i);
        }
    }
    Ok(KktReport {
        max_violation,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::Provenance;

    fn bank(c: Matrix) -> ConceptBank {
        let d = c.rows();
        ConceptBank::new(c, vec![0.0; d], Provenance::External).unwrap()
    }

    #[test]
    fn soft_threshold_formula() {
        assert_eq!(soft_threshold(&[3.0, -0.5, 2.0], 1.0), vec![2.0, 0.0, 1.0]);
        assert_eq!(soft_threshold(&[3.0, -0.5], 0.0), vec![3.0, -0.5]);
        assert_eq!(soft_threshold(&[0.3, -0.2], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn orthonormal_dictionary_without_penalty() {
        let b = bank(Matrix::identity(3));
        let code = lasso_ista(&b, &[1.0, -2.0, 0.5], &LassoConfig::with_lambda(0.0)).unwrap();
        assert_eq!(code.w, vec![1.0, -2.0, 0.5]);
        assert!(code.converged);
    }

    #[test]
    fn large_lambda_shuts_everything_off() {
        let c = Matrix::from_rows(&[[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]]).unwrap();
        let b = bank(c.clone());
        let x = [0.4, -0.3, 0.9];
        let lam = c
            .t_matvec(&x)
            .unwrap()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let code = lasso_ista(&b, &x, &LassoConfig::with_lambda(lam)).unwrap();
        assert!(code.w.iter().all(|&v| v == 0.0));
        assert_eq!(code.active_count, 0);
        let kkt = check_kkt(&b, &x, &code, lam, 1e-8).unwrap();
        assert!(kkt.max_violation <= 1e-8);
    }

    #[test]
    fn truncated_run_violates_kkt() {
        let c = Matrix::from_rows(&[[1.0, 0.9], [0.0, 0.5], [0.2, 0.1]]).unwrap();
        let b = bank(c);
        let x = [1.0, 2.0, -1.0];
        let cfg = LassoConfig {
            lambda: 0.01,
            max_iter: 1,
            ..LassoConfig::default()
        };
        let code = lasso_ista(&b, &x, &cfg).unwrap();
        assert!(!code.converged);
        let kkt = check_kkt(&b, &x, &code, 0.01, 1e-4).unwrap();
        assert!(!kkt.passed());
    }

    #[test]
    fn invalid_config() {
        let b = bank(Matrix::identity(2));
        let cfg = LassoConfig {
            lambda: -1.0,
            ..LassoConfig::default()
        };
        assert!(matches!(
            lasso_ista(&b, &[0.0, 0.0], &cfg),
            Err(Error::Parameter(_))
        ));
    }
}
