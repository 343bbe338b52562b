use crate::error::{Error, Result};

use super::matrix::{dot, norm2};
use super::Matrix;

/// `‖A‖₂²` by power iteration on `AᵀA`.
///
/// Stops when successive Rayleigh quotients differ by at most `tol` relative to
/// the current estimate. The start vector is fixed, so results are reproducible.
pub fn spectral_norm_sq(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    // Deterministic, generic start vector (golden-ratio sequence) so it is
    // unlikely to be orthogonal to the top singular direction.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 0.5 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let av = a.matvec(&v)?;
        let rayleigh = dot(&av, &av);
        let mut w = a.t_matvec(&av)?;
        let nw = norm2(&w);
        if nw == 0.0 {
            // v fell into the null space; the fixed start makes this unlikely
            // unless A is numerically zero.
            return Ok(rayleigh);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let converged = (rayleigh - estimate).abs() <= tol * rayleigh;
        estimate = rayleigh;
        v = w;
        if converged {
            return Ok(estimate);
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_identity() {
        let d = Matrix::from_diag(&[3.0, 1.0]);
        assert!((spectral_norm_sq(&d, 1e-12, 1000).unwrap() - 9.0).abs() < 1e-9);
        let i = Matrix::identity(5);
        assert!((spectral_norm_sq(&i, 1e-12, 1000).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let d = Matrix::from_diag(&[1.0, 0.999_999, 0.5]);
        match spectral_norm_sq(&d, 1e-15, 2) {
            Err(Error::Convergence {
                iterations: 2,
                estimate,
            }) => assert!(estimate > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_is_zero() {
        assert_eq!(
            spectral_norm_sq(&Matrix::zeros(3, 2), 1e-6, 10).unwrap(),
            0.0
        );
    }
}
