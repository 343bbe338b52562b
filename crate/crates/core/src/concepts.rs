//! Editing sparse codes in concept space and mapping them back to embeddings.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cca::ConceptBank;
use crate::error::{Error, Result};
use crate::linalg::EmbeddingMatrix;
use crate::sparse::{LassoConfig, LassoSolver, SparseCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Ablate,
    Insert,
    Swap,
}

/// How `insert` treats an existing coefficient at the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InsertMode {
    /// `w*_j = w_j + w_i`, conserving total mass.
    #[default]
    Additive,
    /// `w*_j = w_i`.
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditOp {
    pub kind: EditKind,
    pub source: usize,
    pub target: Option<usize>,
}

impl EditOp {
    pub fn ablate(i: usize) -> Self {
        Self {
            kind: EditKind::Ablate,
            source: i,
            target: None,
        }
    }

    pub fn insert(i: usize, j: usize) -> Self {
        Self {
            kind: EditKind::Insert,
            source: i,
            target: Some(j),
        }
    }

    pub fn swap(i: usize, j: usize) -> Self {
        Self {
            kind: EditKind::Swap,
            source: i,
            target: Some(j),
        }
    }

    pub fn apply(&self, code: &SparseCode, mode: InsertMode) -> Result<SparseCode> {
        match (self.kind, self.target) {
            (EditKind::Ablate, _) => ablate(code, self.source),
            (EditKind::Insert, Some(j)) => insert_with(code, self.source, j, mode),
            (EditKind::Swap, Some(j)) => swap(code, self.source, j),
            (kind, None) => Err(Error::Parameter(format!("{kind:?} needs a target concept"))),
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.target) {
            (EditKind::Ablate, _) => write!(f, "ablate:{}", self.source),
            (EditKind::Insert, Some(j)) => write!(f, "insert:{}:{}", self.source, j),
            (EditKind::Swap, Some(j)) => write!(f, "swap:{}:{}", self.source, j),
            (kind, None) => write!(f, "{kind:?}:{}", self.source),
        }
    }
}

/// Parses `ablate:i`, `insert:i:j` or `swap:i:j`.
impl FromStr for EditOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let index = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad concept index '{p}' in edit '{s}'")))
        };
        match parts.as_slice() {
            ["ablate", i] => Ok(EditOp::ablate(index(i)?)),
            ["insert", i, j] => {
                let (i, j) = (index(i)?, index(j)?);
                distinct(i, j)?;
                Ok(EditOp::insert(i, j))
            }
            ["swap", i, j] => {
                let (i, j) = (index(i)?, index(j)?);
                distinct(i, j)?;
                Ok(EditOp::swap(i, j))
            }
            _ => Err(Error::Usage(format!(
                "edit '{s}' is not ablate:i, insert:i:j or swap:i:j"
            ))),
        }
    }
}

fn check_index(code: &SparseCode, i: usize) -> Result<()> {
    if i >= code.k() {
        return Err(Error::Parameter(format!(
            "concept index {i} out of range for {} concepts",
            code.k()
        )));
    }
    Ok(())
}

fn distinct(i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::Parameter(format!(
            "source and target concept are both {i}"
        )));
    }
    Ok(())
}

/// Zeroes coefficient `i`.
pub fn ablate(code: &SparseCode, i: usize) -> Result<SparseCode> {
    check_index(code, i)?;
    let mut w = code.w.clone();
    w[i] = 0.0;
    Ok(code.with_w(w))
}

/// Moves coefficient `i` onto `j` (additively) and zeroes `i`.
pub fn insert(code: &SparseCode, i: usize, j: usize) -> Result<SparseCode> {
    insert_with(code, i, j, InsertMode::Additive)
}

pub fn insert_with(code: &SparseCode, i: usize, j: usize, mode: InsertMode) -> Result<SparseCode> {
    check_index(code, i)?;
    check_index(code, j)?;
    distinct(i, j)?;
    let mut w = code.w.clone();
    w[j] = match mode {
        InsertMode::Additive => w[j] + w[i],
        InsertMode::Replace => w[i],
    };
    w[i] = 0.0;
    Ok(code.with_w(w))
}

/// Exchanges coefficients `i` and `j`.
pub fn swap(code: &SparseCode, i: usize, j: usize) -> Result<SparseCode> {
    check_index(code, i)?;
    check_index(code, j)?;
    distinct(i, j)?;
    let mut w = code.w.clone();
    w.swap(i, j);
    Ok(code.with_w(w))
}

/// `C·w + μ_X`.
pub fn recompose(bank: &ConceptBank, code: &SparseCode) -> Result<Vec<f64>> {
    recompose_w(bank, &code.w)
}

pub fn recompose_w(bank: &ConceptBank, w: &[f64]) -> Result<Vec<f64>> {
    let mut x = bank.c().matvec(w)?;
    for (v, m) in x.iter_mut().zip(bank.mu_x()) {
        *v += m;
    }
    Ok(x)
}

/// One retrieved row and its activation on the queried concept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrieved {
    pub row: usize,
    pub activation: f64,
}

/// Rows with the largest Lasso coefficient on `concept`, descending; ties go
/// to the lower row index.
pub fn retrieve_top_k(
    bank: &ConceptBank,
    concept: usize,
    x: &EmbeddingMatrix,
    cfg: &LassoConfig,
    topk: usize,
) -> Result<Vec<Retrieved>> {
    if concept >= bank.k() {
        return Err(Error::Parameter(format!(
            "concept {concept} out of range for {} concepts",
            bank.k()
        )));
    }
    if topk > x.rows() {
        return Err(Error::Parameter(format!(
            "asked for {topk} rows out of {}",
            x.rows()
        )));
    }
    let solver = LassoSolver::new(bank, *cfg)?;
    let mut hits = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            solver
                .solve(x.row(i))
                .map(|c| Retrieved {
                    row: i,
                    activation: c.w[concept],
                })
                .map_err(|e| e.at_row(i))
        })
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(|a, b| {
        b.activation
            .total_cmp(&a.activation)
            .then(a.row.cmp(&b.row))
    });
    hits.truncate(topk);
    Ok(hits)
}
