use crate::error::{Error, Result};

use super::Matrix;

/// An `n × d` block of embeddings for one modality with its column mean
/// computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Matrix,
    mean: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(data: Matrix) -> Self {
        let mean = column_mean(&data);
        Self { data, mean }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Ok(Self::new(Matrix::from_rows(rows)?))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn cols(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    /// Copy with the cached mean subtracted from every row.
    pub fn centered(&self) -> Matrix {
        self.centered_by(&self.mean)
            .expect("cached mean has the embedding width")
    }

    /// Copy with `mu` subtracted from every row.
    pub fn centered_by(&self, mu: &[f64]) -> Result<Matrix> {
        if mu.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "mean of length {} for {}-dimensional embeddings",
                mu.len(),
                self.cols()
            )));
        }
        let mut out = self.data.clone();
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(mu) {
                *v -= m;
            }
        }
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> EmbeddingMatrix {
        let d = self.cols();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix::new(Matrix::from_raw(idx.len(), d, data))
    }
}

impl From<Matrix> for EmbeddingMatrix {
    fn from(m: Matrix) -> Self {
        Self::new(m)
    }
}

fn column_mean(m: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; m.cols()];
    if m.rows() == 0 {
        return mean;
    }
    for i in 0..m.rows() {
        for (acc, v) in mean.iter_mut().zip(m.row(i)) {
            *acc += v;
        }
    }
    let n = m.rows() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}
