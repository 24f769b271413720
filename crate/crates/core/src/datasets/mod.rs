//! Data ingestion and synthesis.

mod batches;
mod idx;
mod mixture;
mod stream;

pub use batches::{epoch_batches, minibatches, Batch, Minibatches};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use mixture::{sample_mixture, GaussianMixtureSpec};
pub use stream::{gaussian_stream, GaussianStream};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// How the target rows of a dataset are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// One row per sample, exactly one entry equal to 1, the rest 0.
    OneHot,
    /// A single column holding +1 (class 0) or -1 (class 1).
    Signed,
}

/// Inputs with their targets, row-aligned.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    inputs: Matrix,
    targets: Matrix,
    kind: TargetKind,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, targets: Matrix, kind: TargetKind) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Consistency(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        let class_count = match kind {
            TargetKind::OneHot => {
                for r in 0..targets.rows() {
                    let row = targets.row(r);
                    let ones = row.iter().filter(|&&v| v == 1.0).count();
                    let zeros = row.iter().filter(|&&v| v == 0.0).count();
                    if ones != 1 || ones + zeros != row.len() {
                        return Err(Error::validation(format!("target row {r} is not one-hot")));
                    }
                }
                targets.cols()
            }
            TargetKind::Signed => {
                if targets.cols() != 1 {
                    return Err(Error::validation("signed targets must be a single column"));
                }
                if targets.as_slice().iter().any(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::validation("signed targets must be +1 or -1"));
                }
                2
            }
        };
        Ok(LabeledDataset {
            inputs,
            targets,
            kind,
            class_count,
        })
    }

    /// One-hot dataset from integer class labels.
    pub fn from_labels(inputs: Matrix, labels: &[usize], class_count: usize) -> Result<Self> {
        let mut targets = Matrix::zeros(labels.len(), class_count);
        for (r, &c) in labels.iter().enumerate() {
            if c >= class_count {
                return Err(Error::validation(format!("label {c} out of range 0..{class_count}")));
            }
            targets[(r, c)] = 1.0;
        }
        LabeledDataset::new(inputs, targets, TargetKind::OneHot)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// Class index of sample `i`.
    pub fn class_of(&self, i: usize) -> usize {
        match self.kind {
            TargetKind::OneHot => argmax(self.targets.row(i)),
            TargetKind::Signed => usize::from(self.targets[(i, 0)] < 0.0),
        }
    }

    pub fn classes(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.class_of(i)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
            kind: self.kind,
            class_count: self.class_count,
        }
    }

    /// The first `n` samples (or all of them when `n` exceeds the size).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Indices of the samples of class `c`.
    pub fn indices_of_class(&self, c: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.class_of(i) == c).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
