//! Paired image/text datasets and a planted synthetic generator with a
//! controllable modality gap.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{EmbeddingMatrix, Matrix};
use crate::rng;

use super::{npy, text_io};

/// Share of each class placed in the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Row-paired image and text embeddings with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: EmbeddingMatrix,
    pub texts: EmbeddingMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        images: EmbeddingMatrix,
        texts: EmbeddingMatrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        split: Split,
    ) -> Result<Self> {
        if images.rows() != texts.rows() {
            return Err(Error::Dimension(format!(
                "{} image rows but {} text rows",
                images.rows(),
                texts.rows()
            )));
        }
        if labels.len() != images.rows() {
            return Err(Error::Label(format!(
                "{} labels for {} rows",
                labels.len(),
                images.rows()
            )));
        }
        if let Some((row, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= class_names.len())
        {
            return Err(Error::Label(format!(
                "row {row} has label {l}, only {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            images,
            texts,
            labels,
            class_names,
            split,
        })
    }

    /// Reads NPY matrices and newline text files. Without a class file the
    /// names are `class_0 … class_{max label}`.
    pub fn load(
        images: impl AsRef<Path>,
        texts: impl AsRef<Path>,
        labels: impl AsRef<Path>,
        classes: Option<&Path>,
        split: Split,
    ) -> Result<Self> {
        let x = npy::load_array(images)?;
        let y = npy::load_array(texts)?;
        let labels = text_io::read_labels(labels)?;
        let class_names = match classes {
            Some(p) => text_io::read_classes(p)?,
            None => default_class_names(labels.iter().max().map_or(0, |m| m + 1)),
        };
        Self::new(x.into(), y.into(), labels, class_names, split)
    }

    /// Writes `images.npy`, `texts.npy`, `labels.txt` and `classes.txt` under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        npy::save_array(dir.join("images.npy"), self.images.matrix())?;
        npy::save_array(dir.join("texts.npy"), self.texts.matrix())?;
        text_io::write_labels(dir.join("labels.txt"), &self.labels)?;
        text_io::write_lines(dir.join("classes.txt"), &self.class_names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.images.cols()
    }
}

pub fn default_class_names(m: usize) -> Vec<String> {
    let width = m.saturating_sub(1).to_string().len();
    (0..m).map(|c| format!("class_{c:0width$}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub classes: usize,
    pub d: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    pub gap_magnitude: f64,
    pub seed: u64,
    /// Use the image map for texts as well.
    pub shared_maps: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            classes: 20,
            d: 64,
            latent_dim: 32,
            noise_sigma: 0.3,
            gap_magnitude: 2.0,
            seed: 0,
            shared_maps: false,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.n_per_class < 2 {
            return Err(Error::Parameter(
                "need at least 2 classes and 2 rows per class".into(),
            ));
        }
        if self.latent_dim == 0 || self.latent_dim > self.d {
            return Err(Error::Parameter(format!(
                "latent_dim = {} must be in [1, d = {}]",
                self.latent_dim, self.d
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Parameter(format!(
                "noise_sigma = {} must be >= 0",
                self.noise_sigma
            )));
        }
        if !self.gap_magnitude.is_finite() {
            return Err(Error::Parameter("gap_magnitude must be finite".into()));
        }
        Ok(())
    }
}

fn normal_matrix(rows: usize, cols: usize, scale: f64, r: &mut rng::StreamRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(r);
        scale * z
    })
}

/// Draws class prototypes `z_c ~ N(0, I)`, maps them with random `d × L`
/// matrices (entries `N(0, 1/L)`), adds `N(0, σ²)` noise per view and the
/// shared gap `gap·g` to every text row, then splits each class 80/20.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let SyntheticSpec {
        n_per_class,
        classes,
        d,
        latent_dim: l,
        ..
    } = *spec;
    let seed = spec.seed;
    let z = normal_matrix(classes, l, 1.0, &mut rng::stream(seed, "synth.prototypes"));
    let scale = 1.0 / (l as f64).sqrt();
    let a_img = normal_matrix(d, l, scale, &mut rng::stream(seed, "synth.map.image"));
    let a_txt = if spec.shared_maps {
        a_img.clone()
    } else {
        normal_matrix(d, l, scale, &mut rng::stream(seed, "synth.map.text"))
    };
    let mut g = normal_matrix(1, d, 1.0, &mut rng::stream(seed, "synth.gap")).into_vec();
    let gn = crate::linalg::norm2(&g);
    g.iter_mut().for_each(|v| *v /= gn);

    let n = classes * n_per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / n_per_class).collect();
    let clean_img = z.matmul(&a_img.transpose())?;
    let clean_txt = z.matmul(&a_txt.transpose())?;
    let noise_img = normal_matrix(
        n,
        d,
        spec.noise_sigma,
        &mut rng::stream(seed, "synth.noise.image"),
    );
    let noise_txt = normal_matrix(
        n,
        d,
        spec.noise_sigma,
        &mut rng::stream(seed, "synth.noise.text"),
    );
    let images = Matrix::from_fn(n, d, |i, j| {
        clean_img.get(labels[i], j) + noise_img.get(i, j)
    });
    let texts = Matrix::from_fn(n, d, |i, j| {
        clean_txt.get(labels[i], j) + noise_txt.get(i, j) + spec.gap_magnitude * g[j]
    });

    let n_train =
        ((TRAIN_FRACTION * n_per_class as f64).round() as usize).clamp(1, n_per_class - 1);
    let mut split_rng = rng::stream(seed, "synth.split");
    let mut train_idx = Vec::with_capacity(classes * n_train);
    let mut test_idx = Vec::with_capacity(n - classes * n_train);
    for c in 0..classes {
        let mut idx: Vec<usize> = (c * n_per_class..(c + 1) * n_per_class).collect();
        idx.shuffle(&mut split_rng);
        let (tr, te) = idx.split_at(n_train);
        train_idx.extend_from_slice(tr);
        test_idx.extend_from_slice(te);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let images = EmbeddingMatrix::new(images);
    let texts = EmbeddingMatrix::new(texts);
    let names = default_class_names(classes);
    let part = |idx: &[usize], split| {
        Dataset::new(
            images.select_rows(idx),
            texts.select_rows(idx),
            idx.iter().map(|&i| labels[i]).collect(),
            names.clone(),
            split,
        )
    };
    Ok((
        part(&train_idx, Split::Train)?,
        part(&test_idx, Split::Test)?,
    ))
}
