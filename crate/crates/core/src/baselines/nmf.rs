//! Nonnegative matrix factorization with Lee–Seung multiplicative updates.

use rand_distr::{Distribution, StandardNormal};

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng;
use crate::sparse::SparseCode;

/// Keeps denominators away from zero.
const MU_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NmfModel {
    /// `d × k`, nonnegative.
    pub c: Matrix,
    /// `k × n`, nonnegative.
    pub w: Matrix,
    /// `s = min(0, min X)`; the factorized data is `X − s`.
    pub shift: f64,
    /// `½‖(X − s)ᵀ − CW‖_F²` at initialization and after each update.
    pub objective_history: Vec<f64>,
}

impl NmfModel {
    /// Bank with `μ = s·1`, so centering undoes the shift.
    pub fn bank(&self) -> Result<ConceptBank> {
        ConceptBank::new(
            self.c.clone(),
            vec![self.shift; self.c.rows()],
            Provenance::Nmf,
        )
    }
}

fn objective(v: &Matrix, c: &Matrix, w: &Matrix) -> f64 {
    let r = v
        .sub(&c.matmul(w).expect("factor shapes"))
        .expect("factor shapes");
    0.5 * r.frobenius_norm().powi(2)
}

/// Factorizes the shifted, transposed data `(X − s)ᵀ ≈ C·W` for `n × d` input `x`.
pub fn nmf_fit(x: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<NmfModel> {
    let (n, d) = x.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::Parameter(format!(
            "k = {k} must be in [1, {}]",
            n.min(d)
        )));
    }
    let shift = x.as_slice().iter().cloned().fold(0.0, f64::min);
    // V = (X − s)ᵀ, d × n.
    let v = Matrix::from_fn(d, n, |i, j| x.get(j, i) - shift);
    let mean = v.as_slice().iter().sum::<f64>() / (n * d) as f64;
    let scale = (mean.max(MU_EPS) / k as f64).sqrt();

    let mut r = rng::stream(seed, "nmf.init");
    let mut draw = |rows, cols| {
        Matrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            // Strictly positive start: multiplicative updates cannot leave zero.
            (z.abs() * scale).max(MU_EPS)
        })
    };
    let mut c = draw(d, k);
    let mut w = draw(k, n);

    let mut history = vec![objective(&v, &c, &w)];
    for _ in 0..max_iter {
        // W ← W ⊙ CᵀV / (CᵀC W)
        let num = c.t_matmul(&v)?;
        let den = c.t_matmul(&c)?.matmul(&w)?;
        w = multiplicative(&w, &num, &den);
        // C ← C ⊙ V Wᵀ / (C W Wᵀ)
        let wt = w.transpose();
        let num = v.matmul(&wt)?;
        let den = c.matmul(&w.matmul(&wt)?)?;
        c = multiplicative(&c, &num, &den);
        history.push(objective(&v, &c, &w));
    }
    Ok(NmfModel {
        c,
        w,
        shift,
        objective_history: history,
    })
}

fn multiplicative(f: &Matrix, num: &Matrix, den: &Matrix) -> Matrix {
    let data = f
        .as_slice()
        .iter()
        .zip(num.as_slice())
        .zip(den.as_slice())
        .map(|((&a, &p), &q)| (a * p.max(0.0) / (q + MU_EPS)).max(0.0))
        .collect();
    Matrix::from_raw(f.rows(), f.cols(), data)
}

/// Nonnegative code of `x_shifted = x − s` (negative entries clipped to 0)
/// by multiplicative updates with `C` fixed.
pub fn nmf_code(c: &Matrix, x_shifted: &[f64], max_iter: usize, tol: f64) -> Result<SparseCode> {
    if x_shifted.len() != c.rows() {
        return Err(Error::Dimension(format!(
            "{}-dimensional input for a {}-dimensional dictionary",
            x_shifted.len(),
            c.rows()
        )));
    }
    let v: Vec<f64> = x_shifted.iter().map(|&a| a.max(0.0)).collect();
    let gram = c.t_matmul(c)?;
    let ctv = c.t_matvec(&v)?;
    let k = c.cols();
    let mut w = vec![1.0; k];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next: Vec<f64> = (0..k)
            .map(|i| (w[i] * ctv[i].max(0.0) / (dot(gram.row(i), &w) + MU_EPS)).max(0.0))
            .collect();
        let delta = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = w.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        w = next;
        if delta / scale < tol {
            converged = true;
            break;
        }
    }
    let recon = c.matvec(&w)?;
    let objective = 0.5
        * recon
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    let mut code = SparseCode::from_coefficients(w);
    code.iterations = iterations;
    code.converged = converged;
    code.objective = objective;
    Ok(code)
}
