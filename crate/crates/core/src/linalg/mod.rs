//! Dense linear algebra: matrices, covariances, symmetric eigendecomposition,
//! inverse square roots, SVD and spectral-norm estimation.

mod eigen;
mod embedding;
mod matrix;
mod power;
mod svd;

pub use eigen::{sym_eig, SymEig, SYMMETRY_TOL};
pub use embedding::EmbeddingMatrix;
pub use matrix::{cosine, dot, norm2, Matrix};
pub use power::spectral_norm_sq;
pub use svd::{svd, Svd};

use crate::error::{Error, Result};

/// `(1/n)·X̄ᵀX̄`, with `X̄` the column-centered data when `center` is set.
pub fn covariance(x: &EmbeddingMatrix, center: bool) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let xc = if center {
        x.centered()
    } else {
        x.matrix().clone()
    };
    let mut s = xc.t_matmul(&xc)?.scale(1.0 / n as f64);
    symmetrize(&mut s);
    Ok(s)
}

/// `(1/n)·X̄ᵀȲ` on centered inputs.
pub fn cross_covariance(x: &EmbeddingMatrix, y: &EmbeddingMatrix) -> Result<Matrix> {
    if x.rows() != y.rows() {
        return Err(Error::Dimension(format!(
            "cross-covariance of {} and {} rows",
            x.rows(),
            y.rows()
        )));
    }
    let n = x.rows();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "cross-covariance needs at least 2 rows, got {n}"
        )));
    }
    Ok(x.centered().t_matmul(&y.centered())?.scale(1.0 / n as f64))
}

/// Default eigenvalue floor for [`sym_inverse_sqrt`]: `1e-8 · trace(A) / d`.
pub fn default_eigen_floor(a: &Matrix) -> f64 {
    let d = a.rows().max(1) as f64;
    1e-8 * a.trace() / d
}

/// `Q · diag(max(λ, floor)^{-1/2}) · Qᵀ` for symmetric `A`.
pub fn sym_inverse_sqrt(a: &Matrix, eigen_floor: f64) -> Result<Matrix> {
    if !(eigen_floor > 0.0) {
        return Err(Error::Parameter(format!(
            "eigen floor must be positive, got {eigen_floor}"
        )));
    }
    let eig = sym_eig(a)?;
    Ok(eig.map_spectrum(|l| 1.0 / l.max(eigen_floor).sqrt()))
}

/// Replaces `A` by `(A + Aᵀ)/2` in place.
pub(crate) fn symmetrize(a: &mut Matrix) {
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
}
