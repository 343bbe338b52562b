use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};

/// Which method produced a concept bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Scocca,
    Varimax,
    Kmeans,
    Nmf,
    Tcav,
    External,
}

impl Provenance {
    pub const ALL: [Provenance; 6] = [
        Provenance::Scocca,
        Provenance::Varimax,
        Provenance::Kmeans,
        Provenance::Nmf,
        Provenance::Tcav,
        Provenance::External,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Scocca => "scocca",
            Provenance::Varimax => "varimax",
            Provenance::Kmeans => "kmeans",
            Provenance::Nmf => "nmf",
            Provenance::Tcav => "tcav",
            Provenance::External => "external",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown method '{s}' (expected scocca, varimax, kmeans, nmf, tcav or external)"
                ))
            })
    }
}

/// A `d × k` concept dictionary together with the mean it was centered by.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptBank {
    c: Matrix,
    mu_x: Vec<f64>,
    labels: Option<Vec<String>>,
    provenance: Provenance,
    singular_values: Option<Vec<f64>>,
    ridge: Option<f64>,
}

impl ConceptBank {
    /// Validates that `c` has finite, nonzero columns and that `mu_x` has length `d`.
    pub fn new(c: Matrix, mu_x: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if c.cols() == 0 {
            return Err(Error::Degenerate("concept bank has no concepts".into()));
        }
        if mu_x.len() != c.rows() {
            return Err(Error::Dimension(format!(
                "mean of length {} for a {}-dimensional bank",
                mu_x.len(),
                c.rows()
            )));
        }
        if let Some(pos) = mu_x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos, col: 0 });
        }
        for (j, n) in c.column_norms().into_iter().enumerate() {
            if !n.is_finite() || n == 0.0 {
                return Err(Error::Degenerate(format!(
                    "concept column {j} has norm {n}"
                )));
            }
        }
        Ok(Self {
            c,
            mu_x,
            labels: None,
            provenance,
            singular_values: None,
            ridge: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.k() {
            return Err(Error::Label(format!(
                "{} labels for {} concepts",
                labels.len(),
                self.k()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Label(format!("duplicate label '{l}'")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_singular_values(mut self, s: Vec<f64>) -> Self {
        self.singular_values = Some(s);
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = Some(ridge);
        self
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn mu_x(&self) -> &[f64] {
        &self.mu_x
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn singular_values(&self) -> Option<&[f64]> {
        self.singular_values.as_deref()
    }

    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// Embedding dimension.
    pub fn d(&self) -> usize {
        self.c.rows()
    }

    /// Number of concepts.
    pub fn k(&self) -> usize {
        self.c.cols()
    }

    pub fn concept(&self, j: usize) -> Vec<f64> {
        self.c.column(j)
    }

    /// Index of the concept carrying `label`.
    pub fn concept_for_label(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    /// `x − μ_X`, checking the length.
    pub fn center(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::Dimension(format!(
                "embedding of length {} for a {}-dimensional bank",
                x.len(),
                self.d()
            )));
        }
        Ok(x.iter().zip(&self.mu_x).map(|(a, m)| a - m).collect())
    }

    /// Unit-norm copies of the concept columns.
    pub fn normalized_columns(&self) -> Vec<Vec<f64>> {
        self.c
            .columns()
            .into_iter()
            .map(|c| {
                let n = norm2(&c);
                c.into_iter().map(|v| v / n).collect()
            })
            .collect()
    }
}
