//! Datasets and mini-batch sampling.
//!
//! A [`Dataset`] stores every sample (train and test) row-major, with the
//! split held as two disjoint index lists. Samplers draw positions into the
//! training list, not raw row numbers; [`Dataset::train_row`] maps between
//! the two.

mod cifar;
mod idx;
mod sampler;
mod wdbc;

pub use cifar::{load_cifar10, CIFAR_RECORD_BYTES};
pub use idx::{load_mnist, read_idx_images, read_idx_labels, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
pub use sampler::{MiniBatchSampler, SamplerMode};
pub use wdbc::{load_wdbc, WDBC_TEST, WDBC_TRAIN};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    n_features: usize,
    n_targets: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    labels: Vec<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// Assembles a dataset and checks its invariants.
    ///
    /// `targets` is either one column of 0/1 values (binary problems) or a
    /// one-hot matrix with `n_targets` columns.
    pub fn from_parts(
        name: impl Into<String>,
        n_features: usize,
        inputs: Vec<f64>,
        n_targets: usize,
        targets: Vec<f64>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        if n_features == 0 || n_targets == 0 || !inputs.len().is_multiple_of(n_features) {
            return Err(Error::LengthMismatch(format!(
                "{} inputs do not split into rows of {n_features}",
                inputs.len()
            )));
        }
        let n = inputs.len() / n_features;
        if targets.len() != n * n_targets {
            return Err(Error::LengthMismatch(format!(
                "{} samples but {} target values for width {n_targets}",
                n,
                targets.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset inputs"));
        }
        let mut labels = Vec::with_capacity(n);
        for row in targets.chunks(n_targets) {
            if n_targets == 1 {
                if row[0] != 0.0 && row[0] != 1.0 {
                    return Err(Error::Config(format!("binary target {} is not 0/1", row[0])));
                }
                labels.push(row[0] as usize);
            } else {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&t| t != 0.0 && t != 1.0) || sum != 1.0 {
                    return Err(Error::Config("target row is not one-hot".into()));
                }
                labels.push(row.iter().position(|&t| t == 1.0).unwrap());
            }
        }
        let mut seen = vec![0u8; n];
        for &i in train.iter().chain(&test) {
            if i >= n {
                return Err(Error::LengthMismatch(format!("split index {i} out of {n} samples")));
            }
            seen[i] += 1;
            if seen[i] > 1 {
                return Err(Error::Config(format!("sample {i} appears twice in the split")));
            }
        }
        if train.is_empty() {
            return Err(Error::Config("empty training split".into()));
        }
        Ok(Self { name: name.into(), n_features, n_targets, inputs, targets, labels, train, test })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn target(&self, row: usize) -> &[f64] {
        &self.targets[row * self.n_targets..(row + 1) * self.n_targets]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn split(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Row number of the `pos`-th training sample.
    pub fn train_row(&self, pos: usize) -> usize {
        self.train[pos]
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    /// Keeps only the first `n_train` training and `n_test` test samples.
    pub fn truncated(mut self, n_train: usize, n_test: usize) -> Self {
        self.train.truncate(n_train);
        self.test.truncate(n_test);
        self
    }
}

pub(crate) fn one_hot(labels: &[u8], classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        out[i * classes + l as usize] = 1.0;
    }
    out
}
