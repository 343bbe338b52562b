//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use crate::error::Result;

use super::matrix::{dot, norm2};
use super::Matrix;

const MAX_SWEEPS: usize = 80;

/// `A = U · diag(s) · Vᵀ` with `r = min(m, n)` singular triplets.
///
/// `u` is `m × r`, `vt` is `r × n`, `s` is descending and nonnegative. For each
/// triplet the largest-magnitude entry of the left vector is positive.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *v *= s;
            }
        }
        us.matmul(&self.vt).expect("svd factors are conformable")
    }
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    // Matrix construction already rejects non-finite input.
    if a.rows() >= a.cols() {
        Ok(tall_svd(a))
    } else {
        let t = tall_svd(&a.transpose());
        let mut out = Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        };
        normalize_signs(&mut out);
        Ok(out)
    }
}

/// SVD of an `m × n` matrix with `m ≥ n`.
fn tall_svd(a: &Matrix) -> Svd {
    let (m, n) = a.shape();
    // Column-major working copies: cols[j] is column j of A·V, vcols[j] column j of V.
    let mut cols: Vec<Vec<f64>> = a.columns();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let tol = (m as f64).sqrt() * f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let s_max = norms.iter().cloned().fold(0.0, f64::max);

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vt_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let nj = norms[j];
        if nj == 0.0 || nj <= s_max * 1e-150 {
            deficient.push(slot);
            ucols.push(vec![0.0; m]);
        } else {
            ucols.push(cols[j].iter().map(|v| v / nj).collect());
        }
        s.push(nj);
        vt_rows.push(vcols[j].clone());
    }
    complete_basis(&mut ucols, &deficient);

    let mut out = Svd {
        u: Matrix::from_fn(m, n, |i, j| ucols[j][i]),
        s,
        vt: Matrix::from_fn(n, n, |i, j| vt_rows[i][j]),
    };
    normalize_signs(&mut out);
    out
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other column,
/// drawing candidates from the standard basis in index order.
fn complete_basis(ucols: &mut [Vec<f64>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let m = ucols[0].len();
    let mut filled: Vec<bool> = (0..ucols.len()).map(|j| !slots.contains(&j)).collect();
    let mut candidate = 0;
    for &slot in slots {
        while candidate < m {
            let mut v = vec![0.0; m];
            v[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt for stability.
            for _ in 0..2 {
                for (j, u) in ucols.iter().enumerate() {
                    if filled[j] {
                        let proj = dot(&v, u);
                        for (vi, ui) in v.iter_mut().zip(u) {
                            *vi -= proj * ui;
                        }
                    }
                }
            }
            let nv = norm2(&v);
            if nv > 1e-3 {
                ucols[slot] = v.into_iter().map(|x| x / nv).collect();
                filled[slot] = true;
                break;
            }
        }
    }
}

fn normalize_signs(svd: &mut Svd) {
    let r = svd.s.len();
    for j in 0..r {
        let mut best = 0;
        for i in 1..svd.u.rows() {
            if svd.u.get(i, j).abs() > svd.u.get(best, j).abs() {
                best = i;
            }
        }
        if svd.u.get(best, j) < 0.0 {
            svd.u.negate_column(j);
            for v in svd.vt.row_mut(j) {
                *v = -*v;
            }
        }
    }
}
