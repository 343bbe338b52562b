//! PCA followed by a Kaiser-normalized varimax rotation.

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{covariance, sym_eig, EmbeddingMatrix, Matrix};

#[derive(Debug, Clone)]
pub struct VarimaxModel {
    /// `d × k` rotated basis `V_k R`, orthonormal columns.
    pub components: Matrix,
    /// `k × k` orthogonal rotation.
    pub rotation: Matrix,
    /// Varimax criterion of the normalized loadings before rotation and after each sweep.
    pub criterion_history: Vec<f64>,
    pub sweeps: usize,
}

impl VarimaxModel {
    pub fn bank(&self, mu_x: Vec<f64>) -> Result<ConceptBank> {
        ConceptBank::new(self.components.clone(), mu_x, Provenance::Varimax)
    }
}

/// `Σ_j [Σ_i λ_ij⁴ − (1/d)(Σ_i λ_ij²)²]`.
pub fn varimax_criterion(loadings: &Matrix) -> f64 {
    let (d, k) = loadings.shape();
    let mut total = 0.0;
    for j in 0..k {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for i in 0..d {
            let v = loadings.get(i, j) * loadings.get(i, j);
            s2 += v;
            s4 += v * v;
        }
        total += s4 - s2 * s2 / d as f64;
    }
    total
}

/// Rotates the top-`k` principal directions of the centered rows `x`.
pub fn varimax_fit(x: &Matrix, k: usize, max_iter: usize, tol: f64) -> Result<VarimaxModel> {
    let (n, d) = x.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::Parameter(format!(
            "k = {k} must be in [1, {}]",
            n.min(d)
        )));
    }
    let cov = covariance(&EmbeddingMatrix::new(x.clone()), false)?;
    let eig = sym_eig(&cov)?;
    let basis = eig.eigenvectors.leading_columns(k);

    // Kaiser normalization: rotate unit-length rows, then undo the scaling.
    let h: Vec<f64> = (0..d)
        .map(|i| basis.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut a = Matrix::from_fn(d, k, |i, j| {
        if h[i] > 0.0 {
            basis.get(i, j) / h[i]
        } else {
            0.0
        }
    });
    let mut rot = Matrix::identity(k);
    let mut history = vec![varimax_criterion(&a)];
    let mut sweeps = 0;
    if k > 1 {
        while sweeps < max_iter {
            sweeps += 1;
            for p in 0..k {
                for q in (p + 1)..k {
                    let phi = pair_angle(&a, p, q);
                    if phi != 0.0 {
                        rotate_columns(&mut a, p, q, phi);
                        rotate_columns(&mut rot, p, q, phi);
                    }
                }
            }
            let crit = varimax_criterion(&a);
            let prev = *history.last().expect("nonempty");
            history.push(crit);
            if (crit - prev).abs() < tol {
                break;
            }
        }
    }

    let mut components = basis.matmul(&rot)?;
    // Deterministic orientation: largest-magnitude entry of each column positive.
    for j in 0..k {
        let col = components.column(j);
        let best = (0..d).fold(0, |b, i| if col[i].abs() > col[b].abs() { i } else { b });
        if col[best] < 0.0 {
            components.negate_column(j);
            rot.negate_column(j);
        }
    }
    Ok(VarimaxModel {
        components,
        rotation: rot,
        criterion_history: history,
        sweeps,
    })
}

/// Angle maximizing the criterion over the plane of columns `p` and `q`.
fn pair_angle(a: &Matrix, p: usize, q: usize) -> f64 {
    let d = a.rows() as f64;
    let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.rows() {
        let (x, y) = (a.get(i, p), a.get(i, q));
        let u = x * x - y * y;
        let v = 2.0 * x * y;
        sa += u;
        sb += v;
        sc += u * u - v * v;
        sd += 2.0 * u * v;
    }
    let num = sd - 2.0 * sa * sb / d;
    let den = sc - (sa * sa - sb * sb) / d;
    if num == 0.0 && den >= 0.0 {
        return 0.0;
    }
    0.25 * num.atan2(den)
}

/// `[a_p, a_q] ← [a_p cos φ + a_q sin φ, −a_p sin φ + a_q cos φ]`.
fn rotate_columns(a: &mut Matrix, p: usize, q: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    for i in 0..a.rows() {
        let (x, y) = (a.get(i, p), a.get(i, q));
        a.set(i, p, x * c + y * s);
        a.set(i, q, -x * s + y * c);
    }
}
