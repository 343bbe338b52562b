#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use scocca::{EmbeddingMatrix, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

pub fn gaussian_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// Orthogonal matrix from modified Gram-Schmidt on a Gaussian matrix.
pub fn orthogonal(n: usize, r: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian(n, n, r);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut v = g.column(j);
        for q in &cols {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= nv);
        cols.push(v);
    }
    Matrix::from_columns(&cols).unwrap()
}

pub fn emb(m: Matrix) -> EmbeddingMatrix {
    EmbeddingMatrix::new(m)
}

/// Plain triple loop `A·B`.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|t| a.get(i, t) * b.get(t, j)).sum()
    })
}

/// `(1/n) Σ_t (x_t − x̄)(y_t − ȳ)ᵀ` by explicit loops.
pub fn naive_cross_cov(x: &Matrix, y: &Matrix) -> Matrix {
    let n = x.rows();
    let mx: Vec<f64> = (0..x.cols())
        .map(|j| (0..n).map(|t| x.get(t, j)).sum::<f64>() / n as f64)
        .collect();
    let my: Vec<f64> = (0..y.cols())
        .map(|j| (0..n).map(|t| y.get(t, j)).sum::<f64>() / n as f64)
        .collect();
    Matrix::from_fn(x.cols(), y.cols(), |i, j| {
        (0..n)
            .map(|t| (x.get(t, i) - mx[i]) * (y.get(t, j) - my[j]))
            .sum::<f64>()
            / n as f64
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent for `½‖Cw − b‖² + λ‖w‖₁`, run to a tight tolerance.
pub fn lasso_cd(c: &Matrix, b: &[f64], lambda: f64) -> Vec<f64> {
    let k = c.cols();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| c.column(j)).collect();
    let norms: Vec<f64> = cols.iter().map(|v| v.iter().map(|a| a * a).sum()).collect();
    let mut w = vec![0.0; k];
    let mut r: Vec<f64> = b.to_vec();
    for _ in 0..200_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            let rho: f64 =
                cols[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() + norms[j] * w[j];
            let new = if rho > lambda {
                (rho - lambda) / norms[j]
            } else if rho < -lambda {
                (rho + lambda) / norms[j]
            } else {
                0.0
            };
            let delta = new - w[j];
            if delta != 0.0 {
                r.iter_mut()
                    .zip(&cols[j])
                    .for_each(|(ri, cj)| *ri -= delta * cj);
                w[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < 1e-14 {
            break;
        }
    }
    w
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Best total over injective maps from the smaller side into the larger one.
pub fn brute_force_assignment(s: &Matrix) -> f64 {
    let (r, c) = s.shape();
    let (small, large, get): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if r <= c {
        (r, c, Box::new(|i, j| s.get(i, j)))
    } else {
        (c, r, Box::new(|i, j| s.get(j, i)))
    };
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(large) {
        let t: f64 = (0..small).map(|i| get(i, perm[i])).sum();
        best = best.max(t);
    }
    best
}
