use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, RngState};
use crate::training::{relu, train, EpochMetrics, Head, Model, TrainConfig};

/// Plain weight-space network, `z^{l+1} = h^l w^l`, no biases.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    widths: Vec<usize>,
    head: Head,
    weights: Vec<Matrix>,
}

/// Intermediates of a dense forward pass.
#[derive(Clone, Debug)]
pub(crate) struct DenseCache {
    pub inputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
    pub output: Matrix,
}

pub(crate) fn dense_forward(weights: &[Matrix], head: Head, x: &Matrix) -> Result<DenseCache> {
    let layers = weights.len();
    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut h = x.clone();
    for (l, w) in weights.iter().enumerate() {
        let z = h.matmul(w)?;
        let next = if l + 1 < layers { relu(&z) } else { Matrix::zeros(0, 0) };
        inputs.push(std::mem::replace(&mut h, next));
        pre.push(z);
    }
    let mut output = pre.last().expect("at least one layer").clone();
    head.activate(&mut output);
    Ok(DenseCache {
        inputs,
        pre_activations: pre,
        output,
    })
}

/// `∂L/∂w^l` of the data loss for every layer.
pub(crate) fn dense_weight_gradients(
    weights: &[Matrix],
    head: Head,
    cache: &DenseCache,
    targets: &Matrix,
) -> Result<Vec<Matrix>> {
    let layers = weights.len();
    let mut grads = vec![Matrix::zeros(0, 0); layers];
    let mut k = head.output_error(&cache.output, targets)?;
    for l in (0..layers).rev() {
        grads[l] = cache.inputs[l].t_matmul(&k)?;
        if l > 0 {
            let mut back = k.matmul_t(&weights[l])?;
            for (b, &z) in back.as_mut_slice().iter_mut().zip(cache.pre_activations[l - 1].as_slice()) {
                if z <= 0.0 {
                    *b = 0.0;
                }
            }
            k = back;
        }
    }
    Ok(grads)
}

pub(crate) fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Config(format!("invalid layer widths {widths:?}")));
    }
    Ok(())
}

impl DenseNetwork {
    /// Entries i.i.d. `N(0, 1/N_l)`.
    pub fn init(widths: &[usize], head: Head, rng: &mut RngState) -> Result<Self> {
        check_widths(widths)?;
        let weights = widths
            .windows(2)
            .map(|w| Ok(gaussian_matrix(w[0], w[1], rng)?.scaled(1.0 / (w[0] as f64).sqrt())))
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseNetwork {
            widths: widths.to_vec(),
            head,
            weights,
        })
    }

    pub fn from_weights(head: Head, weights: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut widths = vec![weights[0].rows()];
        for w in &weights {
            if w.rows() != *widths.last().unwrap() {
                return Err(Error::Consistency(format!(
                    "weight shapes do not chain: {:?}",
                    weights.iter().map(Matrix::shape).collect::<Vec<_>>()
                )));
            }
            widths.push(w.cols());
        }
        check_widths(&widths)?;
        Ok(DenseNetwork { widths, head, weights })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    /// Data loss plus `(λ/2)‖w‖²` on a batch.
    pub fn loss(&self, x: &Matrix, targets: &Matrix, l2: f64) -> Result<f64> {
        let cache = dense_forward(&self.weights, self.head, x)?;
        Ok(self.head.data_loss(&cache.output, targets)? + l2 * Model::half_sq_norm(self))
    }

    /// Gradients of [`Self::loss`] including the `λw` term.
    pub fn gradients(&self, x: &Matrix, targets: &Matrix, l2: f64) -> Result<Vec<Matrix>> {
        let cache = dense_forward(&self.weights, self.head, x)?;
        let mut grads = dense_weight_gradients(&self.weights, self.head, &cache, targets)?;
        if l2 != 0.0 {
            for (g, w) in grads.iter_mut().zip(&self.weights) {
                g.axpy(l2, w)?;
            }
        }
        Ok(grads)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.widths[0] {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape(),
                right: self.weights[0].shape(),
            });
        }
        Ok(())
    }
}

impl Model for DenseNetwork {
    fn head(&self) -> Head {
        self.head
    }

    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        self.check_input(x)?;
        let cache = dense_forward(&self.weights, self.head, x)?;
        let mut acts = cache.inputs;
        acts.push(cache.output);
        Ok(acts)
    }

    fn half_sq_norm(&self) -> f64 {
        0.5 * self.weights.iter().map(Matrix::sum_squares).sum::<f64>()
    }

    fn train_step(&mut self, x: &Matrix, targets: &Matrix, lr: f64, l2: f64) -> Result<f64> {
        self.check_input(x)?;
        let cache = dense_forward(&self.weights, self.head, x)?;
        let loss = self.head.data_loss(&cache.output, targets)? + l2 * Model::half_sq_norm(self);
        let grads = dense_weight_gradients(&self.weights, self.head, &cache, targets)?;
        for (w, g) in self.weights.iter_mut().zip(&grads) {
            if l2 != 0.0 {
                let decay = w.scaled(l2);
                w.axpy(-lr, &decay)?;
            }
            w.axpy(-lr, g)?;
        }
        Ok(loss)
    }

    fn trainable_parameters(&self) -> usize {
        dense_parameter_count(&self.widths)
    }
}

pub fn dense_parameter_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1]).sum()
}

/// Initializes a dense network from `cfg.seed` and trains it.
pub fn train_bp(
    widths: &[usize],
    head: Head,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, Vec<EpochMetrics>)> {
    let mut net = DenseNetwork::init(widths, head, &mut RngState::new(cfg.seed))?;
    let history = train(&mut net, train_ds, test_ds, cfg)?;
    Ok((net, history))
}
