use rand::Rng;

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::sparse::SparseCode;

#[derive(Debug, Clone)]
pub struct KMeansModel {
    /// `k × d`, one centroid per row.
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn initial_inertia(&self) -> f64 {
        self.inertia_history[0]
    }

    /// Bank whose columns are the centroids, for data centered by `mu_x`.
    pub fn bank(&self, mu_x: Vec<f64>) -> Result<ConceptBank> {
        ConceptBank::new(self.centroids.transpose(), mu_x, Provenance::Kmeans)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest row of `centroids`; ties go to
/// the lower index.
pub(crate) fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.rows() {
        let d = sq_dist(centroids.row(j), x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations on already-centered rows.
pub fn kmeans_fit(x: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<KMeansModel> {
    let (n, d) = x.shape();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must be in [1, {n}]")));
    }
    let mut rng = rng::stream(seed, "kmeans.seeding");

    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &di) in dist.iter().enumerate() {
                if di > 0.0 && target < di {
                    pick = i;
                    break;
                }
                target -= di;
            }
            // Rounding can leave `pick` on a zero-distance row; fall back to
            // the farthest one.
            if dist[pick] == 0.0 {
                pick = argmax(&dist);
            }
            pick
        } else {
            // Every remaining row coincides with a chosen centroid.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    let mut centroids = Matrix::from_fn(k, d, |j, c| x.get(chosen[j], c));

    let mut assign = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (j, dj) = nearest(&centroids, x.row(i));
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
            dists[i] = dj;
        }
        history.push(dists.iter().sum::<f64>());
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in centroids.row_mut(j).iter_mut().zip(&sums[j]) {
                    *c = s / counts[j] as f64;
                }
            } else {
                // Re-seed an empty cluster at the worst-served row.
                let far = argmax(&dists);
                centroids.row_mut(j).copy_from_slice(x.row(far));
                dists[far] = 0.0;
            }
        }
    }
    Ok(KMeansModel {
        centroids,
        inertia: *history.last().expect("at least one assignment"),
        iterations,
        inertia_history: history,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One-hot code at the nearest centroid (coefficient 1); ties to the lower index.
pub fn kmeans_code(centroids: &Matrix, x_centered: &[f64]) -> Result<SparseCode> {
    if x_centered.len() != centroids.cols() {
        return Err(Error::Dimension(format!(
            "{}-dimensional input for {}-dimensional centroids",
            x_centered.len(),
            centroids.cols()
        )));
    }
    let (j, _) = nearest(centroids, x_centered);
    let mut w = vec![0.0; centroids.rows()];
    w[j] = 1.0;
    Ok(SparseCode::from_coefficients(w))
}
