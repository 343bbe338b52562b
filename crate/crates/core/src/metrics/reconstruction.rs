use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Mean per-row `‖x − x̂‖²/‖x‖²` and mean per-row cosine.
///
/// A zero reconstruction row has cosine 0 (no direction is recovered).
pub fn reconstruction_metrics(x: &Matrix, x_hat: &Matrix) -> Result<(f64, f64)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Dimension(format!(
            "reconstruction of {}x{} by {}x{}",
            x.rows(),
            x.cols(),
            x_hat.rows(),
            x_hat.cols()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Dimension("reconstruction metrics on no rows".into()));
    }
    let mut rel = 0.0;
    let mut cos = 0.0;
    for i in 0..x.rows() {
        let (a, b) = (x.row(i), x_hat.row(i));
        let aa = dot(a, a);
        if aa == 0.0 {
            return Err(Error::Degenerate("embedding is the zero vector".into()).at_row(i));
        }
        let bb = dot(b, b);
        let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        rel += diff / aa;
        if bb > 0.0 {
            cos += (dot(a, b) / (aa * bb).sqrt()).clamp(-1.0, 1.0);
        }
    }
    let n = x.rows() as f64;
    Ok((rel / n, cos / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(reconstruction_metrics(&x, &x).unwrap(), (0.0, 1.0));
        let zero = Matrix::zeros(2, 2);
        assert_eq!(reconstruction_metrics(&x, &zero).unwrap(), (1.0, 0.0));
        let (rel, cos) = reconstruction_metrics(&x, &x.scale(2.0)).unwrap();
        assert_eq!(rel, 1.0);
        assert!((cos - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_named() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        let err = reconstruction_metrics(&x, &x).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
    }
}
