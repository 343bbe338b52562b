//! Closed-form canonical correlation analysis and concept-bank construction.

mod bank;

pub use bank::{ConceptBank, Provenance};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{covariance, cross_covariance, dot, svd, sym_eig, EmbeddingMatrix, Matrix};

/// Relative size of the default ridge: `1e-6 · trace(Σ) / d`.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;

/// Fitted CCA projections for an image view `X` and a text view `Y`.
#[derive(Debug, Clone)]
pub struct CcaModel {
    /// `d_x × k` projection for `X`.
    pub u: Matrix,
    /// `d_y × k` projection for `Y`.
    pub v: Matrix,
    /// Canonical correlations, descending.
    pub singular_values: Vec<f64>,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    /// Ridged covariance of `X` used in the fit.
    pub sigma_x: Matrix,
    /// Ridged covariance of `Y` used in the fit.
    pub sigma_y: Matrix,
    pub k: usize,
    pub ridge_x: f64,
    pub ridge_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// The two parts of the image-to-text InfoNCE loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoNceTerms {
    pub alignment: f64,
    pub uniformity: f64,
    pub temperature: f64,
}

impl InfoNceTerms {
    pub fn total(&self) -> f64 {
        self.alignment + self.uniformity
    }
}

/// `1e-6 · trace(Σ) / d`.
pub fn default_ridge(sigma: &Matrix) -> f64 {
    DEFAULT_RIDGE_SCALE * sigma.trace() / sigma.rows().max(1) as f64
}

/// Fits CCA on raw (uncentered) paired embeddings.
///
/// `ridge = None` uses [`default_ridge`] separately for each view.
pub fn fit_cca(
    x: &EmbeddingMatrix,
    y: &EmbeddingMatrix,
    k: usize,
    ridge: Option<f64>,
) -> Result<CcaModel> {
    if x.rows() != y.rows() {
        return Err(Error::Dimension(format!(
            "views have {} and {} rows",
            x.rows(),
            y.rows()
        )));
    }
    let kmax = x.cols().min(y.cols());
    if k == 0 || k > kmax {
        return Err(Error::Parameter(format!("k = {k} outside [1, {kmax}]")));
    }
    if let Some(r) = ridge {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Parameter(format!(
                "ridge must be finite and >= 0, got {r}"
            )));
        }
    }

    let sx = covariance(x, true)?;
    let sy = covariance(y, true)?;
    let sxy = cross_covariance(x, y)?;
    let ridge_x = ridge.unwrap_or_else(|| default_ridge(&sx));
    let ridge_y = ridge.unwrap_or_else(|| default_ridge(&sy));
    let sigma_x = sx.add_diagonal(ridge_x);
    let sigma_y = sy.add_diagonal(ridge_y);

    let wx = whitening_operator(&sigma_x, "image")?;
    let wy = whitening_operator(&sigma_y, "text")?;
    let m = wx.matmul(&sxy)?.matmul(&wy)?;
    let dec = svd(&m)?;

    let qx = dec.u.leading_columns(k);
    let qy = dec.vt.transpose().leading_columns(k);
    Ok(CcaModel {
        u: wx.matmul(&qx)?,
        v: wy.matmul(&qy)?,
        singular_values: dec.s[..k].to_vec(),
        mu_x: x.mean().to_vec(),
        mu_y: y.mean().to_vec(),
        sigma_x,
        sigma_y,
        k,
        ridge_x,
        ridge_y,
    })
}

/// `Σ^{-1/2}`, refusing covariances that would need eigenvalue flooring: a
/// floored inverse root no longer satisfies the whitening constraints.
fn whitening_operator(sigma: &Matrix, view: &str) -> Result<Matrix> {
    let eig = sym_eig(sigma)?;
    let d = sigma.rows() as f64;
    let floor = 1e-8 * sigma.trace() / d;
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if !(floor > 0.0) || min < floor {
        return Err(Error::Conditioning(format!(
            "{view} covariance has smallest eigenvalue {min:.3e} (floor {floor:.3e}); increase the ridge"
        )));
    }
    Ok(eig.map_spectrum(|l| 1.0 / l.sqrt()))
}

impl CcaModel {
    /// Sum of the retained canonical correlations.
    pub fn objective(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    /// `tr(Uᵀ Σ_XY V)` recomputed from data.
    pub fn trace_objective(&self, x: &EmbeddingMatrix, y: &EmbeddingMatrix) -> Result<f64> {
        let sxy = cross_covariance(x, y)?;
        Ok(self.u.t_matmul(&sxy.matmul(&self.v)?)?.trace())
    }

    /// `max|UᵀΣ_X U − I|` and `max|VᵀΣ_Y V − I|`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let eye = Matrix::identity(self.k);
        let gx = self
            .u
            .t_matmul(&self.sigma_x.matmul(&self.u).expect("shapes"))
            .expect("shapes");
        let gy = self
            .v
            .t_matmul(&self.sigma_y.matmul(&self.v).expect("shapes"))
            .expect("shapes");
        (gx.max_abs_diff(&eye), gy.max_abs_diff(&eye))
    }

    pub fn projection(&self, side: Side) -> &Matrix {
        match side {
            Side::X => &self.u,
            Side::Y => &self.v,
        }
    }

    pub fn mean(&self, side: Side) -> &[f64] {
        match side {
            Side::X => &self.mu_x,
            Side::Y => &self.mu_y,
        }
    }
}

/// Concept dictionary `C = Σ_X U` from the ridged image covariance.
pub fn concept_bank(model: &CcaModel) -> Result<ConceptBank> {
    let c = model.sigma_x.matmul(&model.u)?;
    Ok(ConceptBank::new(c, model.mu_x.clone(), Provenance::Scocca)?
        .with_singular_values(model.singular_values.clone())
        .with_ridge(model.ridge_x))
}

/// `(X − 1μᵀ)·W` for the chosen view.
///
/// Only defined for full-rank models (`k` equal to the view's dimension);
/// a truncated projection is not a whitening transform.
pub fn whiten(x: &EmbeddingMatrix, model: &CcaModel, side: Side) -> Result<EmbeddingMatrix> {
    let w = model.projection(side);
    if x.cols() != w.rows() {
        return Err(Error::Dimension(format!(
            "{}-dimensional input for a {}-dimensional view",
            x.cols(),
            w.rows()
        )));
    }
    if w.cols() != w.rows() {
        return Err(Error::Parameter(format!(
            "whitening needs a full-rank model (k = {}), got k = {}",
            w.rows(),
            w.cols()
        )));
    }
    Ok(EmbeddingMatrix::new(
        x.centered_by(model.mean(side))?.matmul(w)?,
    ))
}

/// Alignment and uniformity parts of the image-to-text InfoNCE loss with
/// unscaled similarities inside the exponent.
pub fn infonce_terms(
    x: &EmbeddingMatrix,
    y: &EmbeddingMatrix,
    temperature: f64,
) -> Result<InfoNceTerms> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::Dimension(format!(
            "InfoNCE on {}x{} and {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::Parameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::Dimension("InfoNCE on empty inputs".into()));
    }
    let pre = 1.0 / (n as f64 * temperature);
    let per_row: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let sims: Vec<f64> = (0..n).map(|j| dot(xi, y.row(j))).collect();
            let m = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + sims.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
            (sims[i], lse)
        })
        .collect();
    let (diag, lse): (f64, f64) = per_row
        .iter()
        .fold((0.0, 0.0), |(a, b), &(d, l)| (a + d, b + l));
    Ok(InfoNceTerms {
        alignment: -pre * diag,
        uniformity: pre * lse,
        temperature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&[
            [1.0, 0.2, -0.3],
            [0.4, -1.1, 0.9],
            [-0.7, 0.5, 0.1],
            [0.3, 0.8, -1.2],
            [-1.5, -0.2, 0.6],
            [0.9, 0.1, 0.4],
        ])
        .unwrap()
    }

    #[test]
    fn identical_views_are_perfectly_correlated() {
        let x = sample();
        let m = fit_cca(&x, &x, 3, Some(1e-10)).unwrap();
        for s in &m.singular_values {
            assert!((s - 1.0).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn k_out_of_range() {
        let x = sample();
        assert!(matches!(fit_cca(&x, &x, 0, None), Err(Error::Parameter(_))));
        assert!(matches!(fit_cca(&x, &x, 4, None), Err(Error::Parameter(_))));
    }

    #[test]
    fn singular_covariance_without_ridge() {
        let x = EmbeddingMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(matches!(
            fit_cca(&x, &x, 1, Some(0.0)),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn whiten_rejects_truncated_model() {
        let x = sample();
        let m = fit_cca(&x, &x, 2, None).unwrap();
        assert!(matches!(whiten(&x, &m, Side::X), Err(Error::Parameter(_))));
    }
}
