//! Grounding concepts in class labels: class prototypes, cosine similarities
//! and an optimal one-to-one assignment.

use crate::cca::ConceptBank;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, EmbeddingMatrix, Matrix};

/// Per-class means of centered embeddings, stored as the columns of `p`.
#[derive(Debug, Clone)]
pub struct PrototypeSet {
    /// `d × M`.
    pub p: Matrix,
    pub class_names: Vec<String>,
    pub counts: Vec<usize>,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.p.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.p.cols() == 0
    }

    pub fn prototype(&self, j: usize) -> Vec<f64> {
        self.p.column(j)
    }

    /// Prototype `j` scaled to unit norm.
    pub fn unit_prototype(&self, j: usize) -> Result<Vec<f64>> {
        let p = self.prototype(j);
        let n = norm2(&p);
        if n == 0.0 {
            return Err(Error::Degenerate(format!(
                "prototype of class '{}' is zero",
                self.class_names[j]
            )));
        }
        Ok(p.into_iter().map(|v| v / n).collect())
    }
}

/// One-to-one map between concepts and classes.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub concept_to_class: Vec<Option<usize>>,
    pub total_similarity: f64,
    /// `k × M` similarities the assignment was solved on.
    pub similarity_matrix: Matrix,
}

impl Assignment {
    /// Inverse map, indexed by class.
    pub fn class_to_concept(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.similarity_matrix.cols()];
        for (i, c) in self.concept_to_class.iter().enumerate() {
            if let Some(j) = c {
                out[*j] = Some(i);
            }
        }
        out
    }
}

/// Mean of the rows with each label after subtracting `mu_x`.
pub fn class_prototypes(
    x: &EmbeddingMatrix,
    labels: &[usize],
    class_names: &[String],
    mu_x: &[f64],
) -> Result<PrototypeSet> {
    if labels.len() != x.rows() {
        return Err(Error::Label(format!(
            "{} labels for {} rows",
            labels.len(),
            x.rows()
        )));
    }
    if mu_x.len() != x.cols() {
        return Err(Error::Dimension(format!(
            "mean of length {} for {}-dimensional embeddings",
            mu_x.len(),
            x.cols()
        )));
    }
    let m = class_names.len();
    let d = x.cols();
    let mut sums = vec![vec![0.0; d]; m];
    let mut counts = vec![0usize; m];
    for (i, &l) in labels.iter().enumerate() {
        if l >= m {
            return Err(Error::Label(format!(
                "row {i} has label {l}, only {m} classes"
            )));
        }
        counts[l] += 1;
        for ((s, v), mu) in sums[l].iter_mut().zip(x.row(i)).zip(mu_x) {
            *s += v - mu;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass { class });
    }
    let p = Matrix::from_fn(d, m, |r, j| sums[j][r] / counts[j] as f64);
    Ok(PrototypeSet {
        p,
        class_names: class_names.to_vec(),
        counts,
    })
}

/// `S_ij = cos(c_i, p_j)`, a `k × M` matrix.
pub fn cosine_similarity_matrix(bank: &ConceptBank, protos: &PrototypeSet) -> Result<Matrix> {
    if bank.d() != protos.p.rows() {
        return Err(Error::Dimension(format!(
            "{}-dimensional concepts against {}-dimensional prototypes",
            bank.d(),
            protos.p.rows()
        )));
    }
    let concepts = bank.c().columns();
    let prototypes = protos.p.columns();
    let cn: Vec<f64> = concepts.iter().map(|c| norm2(c)).collect();
    let pn: Vec<f64> = prototypes.iter().map(|p| norm2(p)).collect();
    if let Some(i) = cn.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!("concept {i} has zero norm")));
    }
    if let Some(j) = pn.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!(
            "prototype of class '{}' has zero norm",
            protos.class_names[j]
        )));
    }
    Ok(Matrix::from_fn(concepts.len(), prototypes.len(), |i, j| {
        (dot(&concepts[i], &prototypes[j]) / (cn[i] * pn[j])).clamp(-1.0, 1.0)
    }))
}

/// Maximum-total-similarity injective assignment of rows (concepts) to
/// columns (classes). Rectangular inputs assign `min(k, M)` pairs.
pub fn hungarian_assign(s: &Matrix) -> Assignment {
    let (k, m) = s.shape();
    let concept_to_class = if k <= m {
        solve_min_cost(&s.scale(-1.0))
    } else {
        // More concepts than classes: assign each class a concept instead.
        let class_to_concept = solve_min_cost(&s.transpose().scale(-1.0));
        let mut out = vec![None; k];
        for (j, i) in class_to_concept.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        out
    };
    let total_similarity = concept_to_class
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| s.get(i, j)))
        .sum();
    Assignment {
        concept_to_class,
        total_similarity,
        similarity_matrix: s.clone(),
    }
}

/// Shortest augmenting path assignment for an `n × m` cost matrix with
/// `n ≤ m`. Returns the column chosen for each row.
fn solve_min_cost(cost: &Matrix) -> Vec<Option<usize>> {
    let (n, m) = cost.shape();
    if n == 0 {
        return vec![];
    }
    debug_assert!(n <= m);
    // 1-based potentials and matches; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                // Strict comparison keeps the lowest column on ties.
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Copies class names onto assigned concepts; the rest become `concept_<i>`.
pub fn apply_labels(
    bank: &ConceptBank,
    assignment: &Assignment,
    names: &[String],
) -> Result<ConceptBank> {
    if assignment.concept_to_class.len() != bank.k() {
        return Err(Error::Dimension(format!(
            "assignment covers {} concepts, bank has {}",
            assignment.concept_to_class.len(),
            bank.k()
        )));
    }
    let labels = assignment
        .concept_to_class
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(j) => names
                .get(*j)
                .cloned()
                .ok_or_else(|| Error::Label(format!("class index {j} has no name"))),
            None => Ok(format!("concept_{i}")),
        })
        .collect::<Result<Vec<_>>>()?;
    bank.clone().with_labels(labels)
}
