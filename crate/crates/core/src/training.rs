//! Output heads, the model trait shared by every trainer, and the SGD loop.

use crate::datasets::{argmax, minibatches, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, RngState};

/// Smallest probability fed to `ln` in the cross entropy.
pub const LOG_FLOOR: f64 = 1e-300;

/// Rows per chunk when evaluating a whole dataset.
const EVAL_CHUNK: usize = 1000;

/// Output nonlinearity paired with its loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Softmax probabilities with cross entropy `-Σ t ln h`.
    SoftmaxCrossEntropy,
    /// Identity output with `½‖y − t‖²`.
    IdentityMse,
}

impl Head {
    /// Turns pre-activations into outputs in place.
    pub fn activate(self, z: &mut Matrix) {
        if self == Head::SoftmaxCrossEntropy {
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    fn check(self, out: &Matrix, targets: &Matrix) -> Result<()> {
        if out.shape() != targets.shape() {
            return Err(Error::validation(format!(
                "target shape {:?} does not match output shape {:?}",
                targets.shape(),
                out.shape()
            )));
        }
        Ok(())
    }

    /// Mean per-sample data loss.
    pub fn data_loss(self, out: &Matrix, targets: &Matrix) -> Result<f64> {
        self.check(out, targets)?;
        let n = out.rows().max(1) as f64;
        let total: f64 = match self {
            Head::SoftmaxCrossEntropy => out
                .as_slice()
                .iter()
                .zip(targets.as_slice())
                .filter(|(_, &t)| t != 0.0)
                .map(|(&h, &t)| -t * h.max(LOG_FLOOR).ln())
                .sum(),
            Head::IdentityMse => {
                0.5 * out
                    .as_slice()
                    .iter()
                    .zip(targets.as_slice())
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            }
        };
        Ok(total / n)
    }

    /// Derivative of the mean batch loss with respect to the output
    /// pre-activations: `(h − t) / B` for both heads.
    pub fn output_error(self, out: &Matrix, targets: &Matrix) -> Result<Matrix> {
        self.check(out, targets)?;
        let n = out.rows().max(1) as f64;
        Ok(out.sub(targets)?.scaled(1.0 / n))
    }

    /// Predicted class of one output row.
    pub fn predicted_class(self, row: &[f64]) -> usize {
        if row.len() == 1 {
            usize::from(row[0] < 0.0)
        } else {
            argmax(row)
        }
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(z: &Matrix) -> Matrix {
    z.map(|v| v.max(0.0))
}

/// A feedforward network that can be trained by minibatch SGD.
pub trait Model {
    fn head(&self) -> Head;

    fn input_dim(&self) -> usize;

    /// Activations of every layer for a batch: the input itself, each hidden
    /// layer, and the final output.
    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>>;

    /// Final outputs for a batch.
    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut acts = self.activations(x)?;
        Ok(acts.pop().expect("at least one layer"))
    }

    /// `½ Σ θ²` over all trainable parameters.
    fn half_sq_norm(&self) -> f64;

    /// Any penalty beyond L2 that is part of the training objective.
    fn extra_penalty(&self) -> f64 {
        0.0
    }

    /// One SGD step on a batch. Returns the objective before the step.
    fn train_step(&mut self, x: &Matrix, targets: &Matrix, lr: f64, l2: f64) -> Result<f64>;

    fn trainable_parameters(&self) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean data loss (no regularizer).
    pub loss: f64,
}

/// Accuracy and mean data loss over a dataset.
pub fn evaluate<M: Model + ?Sized>(model: &M, ds: &LabeledDataset) -> Result<Evaluation> {
    if ds.input_dim() != model.input_dim() {
        return Err(Error::Shape {
            op: "evaluate",
            left: (ds.len(), ds.input_dim()),
            right: (model.input_dim(), 0),
        });
    }
    if ds.is_empty() {
        return Ok(Evaluation { accuracy: 0.0, loss: 0.0 });
    }
    let head = model.head();
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    let mut start = 0;
    while start < ds.len() {
        let end = (start + EVAL_CHUNK).min(ds.len());
        let idx: Vec<usize> = (start..end).collect();
        let x = ds.inputs().select_rows(&idx);
        let t = ds.targets().select_rows(&idx);
        let out = model.predict(&x)?;
        loss_sum += head.data_loss(&out, &t)? * idx.len() as f64;
        for (r, &i) in idx.iter().enumerate() {
            if head.predicted_class(out.row(r)) == ds.class_of(i) {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / ds.len() as f64,
        loss: loss_sum / ds.len() as f64,
    })
}

/// Optimizer settings shared by all trainers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Strength λ of the `(λ/2)‖θ‖²` penalty.
    pub l2: f64,
    /// Seeds the minibatch order.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            batch_size: 128,
            epochs: 30,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Metrics recorded after each epoch (epoch 0 is the untrained model).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Stream id used for minibatch shuffling, disjoint from initialization streams.
pub const SHUFFLE_STREAM: u64 = 1000;

/// Shuffled minibatch SGD for `cfg.epochs` epochs.
pub fn train<M: Model + ?Sized>(
    model: &mut M,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let record = |model: &M, epoch| -> Result<EpochMetrics> {
        let tr = evaluate(model, train_ds)?;
        let te = evaluate(model, test_ds)?;
        Ok(EpochMetrics {
            epoch,
            train_loss: tr.loss,
            train_accuracy: tr.accuracy,
            test_loss: te.loss,
            test_accuracy: te.accuracy,
        })
    };
    let mut rng = RngState::new(cfg.seed).split(SHUFFLE_STREAM);
    let batch = cfg.batch_size.min(train_ds.len().max(1));
    let mut history = vec![record(model, 0)?];
    for epoch in 1..=cfg.epochs {
        for b in minibatches(train_ds, batch, &mut rng)? {
            let obj = model.train_step(&b.inputs, &b.targets, cfg.learning_rate, cfg.l2)?;
            if !obj.is_finite() {
                return Err(Error::NumericalDomain {
                    what: format!("training objective at epoch {epoch}"),
                    value: obj,
                });
            }
        }
        let m = record(model, epoch)?;
        log::debug!(
            "epoch {epoch}: train loss {:.4}, test acc {:.4}",
            m.train_loss,
            m.test_accuracy
        );
        history.push(m);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut z = Matrix::from_rows(&[vec![1000.0, -1000.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        Head::SoftmaxCrossEntropy.activate(&mut z);
        for r in 0..2 {
            assert!((z.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((z[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_cases() {
        let t = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let perfect = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(Head::SoftmaxCrossEntropy.data_loss(&perfect, &t).unwrap(), 0.0);

        let uniform = Matrix::filled(1, 10, 0.1);
        let mut t10 = Matrix::zeros(1, 10);
        t10[(0, 4)] = 1.0;
        let l = Head::SoftmaxCrossEntropy.data_loss(&uniform, &t10).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);

        let zero = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let l = Head::SoftmaxCrossEntropy.data_loss(&zero, &t).unwrap();
        assert!((l + LOG_FLOOR.ln()).abs() < 1e-9);

        assert!(Head::SoftmaxCrossEntropy.data_loss(&uniform, &t).is_err());
    }

    #[test]
    fn mse_is_half_squared_error() {
        let y = Matrix::from_rows(&[vec![1.0], vec![-3.0]]).unwrap();
        let t = Matrix::from_rows(&[vec![0.0], vec![-1.0]]).unwrap();
        assert_eq!(Head::IdentityMse.data_loss(&y, &t).unwrap(), (0.5 + 2.0) / 2.0);
    }

    #[test]
    fn predicted_class_rules() {
        assert_eq!(Head::IdentityMse.predicted_class(&[0.3]), 0);
        assert_eq!(Head::IdentityMse.predicted_class(&[-0.3]), 1);
        assert_eq!(Head::SoftmaxCrossEntropy.predicted_class(&[0.2, 0.2, 0.6]), 2);
    }
}
