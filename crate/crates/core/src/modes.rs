//! Mode-parameterized feedforward networks.
//!
//! Every weight matrix is the product `w = ξ̂ · diag(Σ) · ξᵀ` of an upstream
//! pattern matrix `ξ̂` (`N_l × p`), an importance vector `Σ` (`p`) and a
//! downstream pattern matrix `ξ` (`N_{l+1} × p`). Training runs directly on
//! these factors; `w` is never needed for the forward or backward pass.
//!
//! Patterns are stored in one flat list so that the tied variant can share a
//! single matrix between the downstream side of layer `l - 1` and the
//! upstream side of layer `l`.

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, Matrix, RngState};
use crate::datasets::LabeledDataset;
use crate::training::{relu, train, EpochMetrics, Head, Model, TrainConfig};

/// How hidden layers hold their patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tying {
    /// Each hidden layer has distinct upstream and downstream patterns (1L2P).
    OneLayerTwoPatterns,
    /// Each hidden layer has a single pattern matrix used on both sides (1L1P).
    OneLayerOnePattern,
}

/// Borrowed view of one layer's factors.
#[derive(Clone, Copy, Debug)]
pub struct ModeLayer<'a> {
    pub xi_hat: &'a Matrix,
    pub sigma: &'a [f64],
    pub xi: &'a Matrix,
}

impl ModeLayer<'_> {
    pub fn modes(&self) -> usize {
        self.sigma.len()
    }

    /// `ξ̂ · diag(Σ) · ξᵀ`, shape `N_l × N_{l+1}`.
    pub fn compose_weight(&self) -> Matrix {
        self.xi_hat
            .scale_columns(self.sigma)
            .and_then(|m| m.matmul_t(self.xi))
            .expect("layer factors have consistent shapes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdlNetwork {
    widths: Vec<usize>,
    tying: Tying,
    head: Head,
    patterns: Vec<Matrix>,
    sigmas: Vec<Vec<f64>>,
    sigma_frozen: bool,
}

/// Gradients laid out like the network's own storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGradients {
    pub patterns: Vec<Matrix>,
    pub sigmas: Vec<Vec<f64>>,
}

/// Per-layer intermediates of a forward pass over a batch.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `h^l`, the input to mode layer `l` (the raw input for `l = 0`).
    pub inputs: Vec<Matrix>,
    /// `κ = h^l ξ̂`, the projection onto the upstream patterns (`B × p_l`).
    pub fields: Vec<Matrix>,
    /// `z^{l+1}`, pre-activations produced by layer `l`.
    pub pre_activations: Vec<Matrix>,
    /// Head applied to the last pre-activation.
    pub output: Matrix,
}

fn pattern_slots(tying: Tying, layer: usize) -> (usize, usize) {
    match tying {
        Tying::OneLayerTwoPatterns => (2 * layer, 2 * layer + 1),
        Tying::OneLayerOnePattern => (layer, layer + 1),
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!("need at least two layer widths, got {widths:?}")));
    }
    if widths.contains(&0) {
        return Err(Error::Config(format!("layer widths must be positive: {widths:?}")));
    }
    Ok(())
}

/// `N(0, 1/rows)` entries, so each column has unit expected norm.
fn unit_column_patterns(rows: usize, p: usize, rng: &mut RngState) -> Result<Matrix> {
    Ok(gaussian_matrix(rows, p, rng)?.scaled(1.0 / (rows as f64).sqrt()))
}

impl MdlNetwork {
    /// Random initialization: pattern entries `N(0, 1/rows)` and importances
    /// `N(0, N_{l+1}/p_l)`, so composed weights have entry variance `1/N_l`
    /// and each factor's SGD step moves the weights by a comparable amount.
    ///
    /// Draw order is fixed (per layer: upstream pattern if new, `Σ`,
    /// downstream pattern), which makes initialization a pure function of the
    /// seed.
    pub fn init(
        widths: &[usize],
        mode_counts: &[usize],
        tying: Tying,
        head: Head,
        rng: &mut RngState,
    ) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths.len() - 1;
        if mode_counts.len() != layers {
            return Err(Error::Config(format!(
                "{} mode counts given for {} layers",
                mode_counts.len(),
                layers
            )));
        }
        if mode_counts.contains(&0) {
            return Err(Error::Config("mode counts must be positive".into()));
        }
        if tying == Tying::OneLayerOnePattern && mode_counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config(format!(
                "tied patterns need equal mode counts on adjacent layers, got {mode_counts:?}"
            )));
        }

        let mut patterns = Vec::new();
        let mut sigmas = Vec::with_capacity(layers);
        for l in 0..layers {
            let p = mode_counts[l];
            let (up, _) = pattern_slots(tying, l);
            if up == patterns.len() {
                patterns.push(unit_column_patterns(widths[l], p, rng)?);
            }
            let scale = (widths[l + 1] as f64 / p as f64).sqrt();
            let sigma: Vec<f64> = (0..p).map(|_| rng.normal() * scale).collect();
            sigmas.push(sigma);
            patterns.push(unit_column_patterns(widths[l + 1], p, rng)?);
        }
        Ok(MdlNetwork {
            widths: widths.to_vec(),
            tying,
            head,
            patterns,
            sigmas,
            sigma_frozen: false,
        })
    }

    /// Assembles a network from explicit parts, validating every shape.
    pub fn from_parts(
        widths: Vec<usize>,
        tying: Tying,
        head: Head,
        patterns: Vec<Matrix>,
        sigmas: Vec<Vec<f64>>,
        sigma_frozen: bool,
    ) -> Result<Self> {
        check_widths(&widths)?;
        let layers = widths.len() - 1;
        let expected_patterns = match tying {
            Tying::OneLayerTwoPatterns => 2 * layers,
            Tying::OneLayerOnePattern => layers + 1,
        };
        if sigmas.len() != layers || patterns.len() != expected_patterns {
            return Err(Error::Consistency(format!(
                "expected {layers} importance vectors and {expected_patterns} pattern matrices, got {} and {}",
                sigmas.len(),
                patterns.len()
            )));
        }
        for l in 0..layers {
            let (up, down) = pattern_slots(tying, l);
            let p = sigmas[l].len();
            if patterns[up].shape() != (widths[l], p) || patterns[down].shape() != (widths[l + 1], p) {
                return Err(Error::Consistency(format!(
                    "layer {l}: patterns {:?}/{:?} inconsistent with widths {}->{} and {p} modes",
                    patterns[up].shape(),
                    patterns[down].shape(),
                    widths[l],
                    widths[l + 1]
                )));
            }
        }
        Ok(MdlNetwork {
            widths,
            tying,
            head,
            patterns,
            sigmas,
            sigma_frozen,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn tying(&self) -> Tying {
        self.tying
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn mode_counts(&self) -> Vec<usize> {
        self.sigmas.iter().map(Vec::len).collect()
    }

    pub fn sigma_frozen(&self) -> bool {
        self.sigma_frozen
    }

    pub fn layer(&self, l: usize) -> ModeLayer<'_> {
        let (up, down) = pattern_slots(self.tying, l);
        ModeLayer {
            xi_hat: &self.patterns[up],
            sigma: &self.sigmas[l],
            xi: &self.patterns[down],
        }
    }

    /// Storage slots `(upstream, downstream)` of layer `l` in [`Self::patterns`].
    pub fn pattern_slots(&self, l: usize) -> (usize, usize) {
        pattern_slots(self.tying, l)
    }

    pub fn patterns(&self) -> &[Matrix] {
        &self.patterns
    }

    pub fn sigmas(&self) -> &[Vec<f64>] {
        &self.sigmas
    }

    pub fn sigma_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.sigmas[l]
    }

    pub fn pattern_mut(&mut self, slot: usize) -> &mut Matrix {
        &mut self.patterns[slot]
    }

    /// Composed weight of every layer.
    pub fn composed_weights(&self) -> Vec<Matrix> {
        (0..self.num_layers()).map(|l| self.layer(l).compose_weight()).collect()
    }

    /// Replaces every `Σ` by ones and excludes it from training, folding the
    /// old importances into the upstream patterns so the network computes the
    /// same function. Only valid for untied networks.
    pub fn absorb_sigma_and_freeze(&mut self) -> Result<()> {
        if self.tying != Tying::OneLayerTwoPatterns {
            return Err(Error::Config("low-rank restriction needs untied patterns".into()));
        }
        for l in 0..self.num_layers() {
            let (up, _) = pattern_slots(self.tying, l);
            self.patterns[up] = self.patterns[up].scale_columns(&self.sigmas[l])?;
            self.sigmas[l].iter_mut().for_each(|s| *s = 1.0);
        }
        self.sigma_frozen = true;
        Ok(())
    }

    /// Zeroes the importances of the listed modes of layer `l`; functionally
    /// the same as removing them.
    pub fn zero_modes(&mut self, l: usize, modes: &[usize]) -> Result<()> {
        self.check_mode_indices(l, modes)?;
        for &a in modes {
            self.sigmas[l][a] = 0.0;
        }
        Ok(())
    }

    /// Deletes the listed `(ξ̂ column, Σ entry, ξ column)` triplets of layer
    /// `l`. Only untied networks own their patterns per layer; tied networks
    /// get a configuration error.
    pub fn remove_modes(&mut self, l: usize, modes: &[usize]) -> Result<()> {
        if self.tying != Tying::OneLayerTwoPatterns {
            return Err(Error::Config("tied patterns are shared between layers and cannot be removed per layer".into()));
        }
        self.check_mode_indices(l, modes)?;
        let kept: Vec<usize> = (0..self.sigmas[l].len()).filter(|a| !modes.contains(a)).collect();
        let (up, down) = pattern_slots(self.tying, l);
        self.patterns[up] = self.patterns[up].select_columns(&kept);
        self.patterns[down] = self.patterns[down].select_columns(&kept);
        self.sigmas[l] = kept.iter().map(|&a| self.sigmas[l][a]).collect();
        Ok(())
    }

    fn check_mode_indices(&self, l: usize, modes: &[usize]) -> Result<()> {
        if l >= self.num_layers() {
            return Err(Error::validation(format!("layer {l} out of range")));
        }
        let p = self.sigmas[l].len();
        if let Some(&bad) = modes.iter().find(|&&a| a >= p) {
            return Err(Error::validation(format!("mode {bad} out of range for layer {l} with {p} modes")));
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.widths[0] {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape(),
                right: (self.widths[0], self.widths[1]),
            });
        }
        Ok(())
    }

    /// Forward pass in mode space: `z = ((h ξ̂) ∘ Σ) ξᵀ`, ReLU on hidden
    /// layers and the head on the last.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_input(x)?;
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut fields = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut h = x.clone();
        for l in 0..layers {
            let layer = self.layer(l);
            let kappa = h.matmul(layer.xi_hat)?;
            let z = kappa.scale_columns(layer.sigma)?.matmul_t(layer.xi)?;
            let next = if l + 1 < layers { relu(&z) } else { Matrix::zeros(0, 0) };
            inputs.push(std::mem::replace(&mut h, next));
            fields.push(kappa);
            pre.push(z);
        }
        let mut output = pre.last().expect("at least one layer").clone();
        self.head.activate(&mut output);
        Ok(ForwardCache {
            inputs,
            fields,
            pre_activations: pre,
            output,
        })
    }

    /// Forward pass through explicitly composed dense weights.
    pub fn forward_dense(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        let layers = self.num_layers();
        for (l, w) in self.composed_weights().iter().enumerate() {
            let z = h.matmul(w)?;
            h = if l + 1 < layers { relu(&z) } else { z };
        }
        self.head.activate(&mut h);
        Ok(h)
    }

    /// `½ Σ θ²` over trainable storage (shared patterns counted once).
    pub fn half_sq_norm(&self) -> f64 {
        let p: f64 = self.patterns.iter().map(Matrix::sum_squares).sum();
        let s: f64 = if self.sigma_frozen {
            0.0
        } else {
            self.sigmas.iter().flatten().map(|v| v * v).sum()
        };
        0.5 * (p + s)
    }

    /// Mean batch data loss plus `(λ/2) Σ θ²`.
    pub fn loss(&self, cache: &ForwardCache, targets: &Matrix, l2: f64) -> Result<f64> {
        Ok(self.head.data_loss(&cache.output, targets)? + l2 * self.half_sq_norm())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let layers = self.num_layers();
        if cache.inputs.len() != layers || cache.fields.len() != layers || cache.pre_activations.len() != layers {
            return Err(Error::Consistency("forward cache has the wrong number of layers".into()));
        }
        let batch = cache.output.rows();
        for l in 0..layers {
            let ok = cache.inputs[l].shape() == (batch, self.widths[l])
                && cache.fields[l].shape() == (batch, self.sigmas[l].len())
                && cache.pre_activations[l].shape() == (batch, self.widths[l + 1]);
            if !ok {
                return Err(Error::Consistency(format!(
                    "forward cache layer {l} does not match the network"
                )));
            }
        }
        Ok(())
    }

    /// Gradients of [`Self::loss`] with respect to every pattern and
    /// importance, including the `λθ` term. Tied patterns receive the sum of
    /// their downstream and upstream contributions.
    pub fn backward(&self, cache: &ForwardCache, targets: &Matrix, l2: f64) -> Result<ModeGradients> {
        self.check_cache(cache)?;
        let layers = self.num_layers();
        let mut g_patterns: Vec<Matrix> = self.patterns.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        let mut g_sigmas: Vec<Vec<f64>> = self.sigmas.iter().map(|s| vec![0.0; s.len()]).collect();

        // Error term K = ∂L/∂z for the layer being processed.
        let mut k = self.head.output_error(&cache.output, targets)?;
        for l in (0..layers).rev() {
            let layer = self.layer(l);
            let (up, down) = pattern_slots(self.tying, l);
            let kappa = &cache.fields[l];
            let h = &cache.inputs[l];

            // ∂L/∂ξ = Kᵀ (κ ∘ Σ)
            let scaled_fields = kappa.scale_columns(layer.sigma)?;
            g_patterns[down].axpy(1.0, &k.t_matmul(&scaled_fields)?)?;

            // e = K ξ ; ∂L/∂Σ_α = Σ_b e_bα κ_bα
            let e = k.matmul(layer.xi)?;
            if !self.sigma_frozen {
                for b in 0..e.rows() {
                    for (g, (&ev, &kv)) in g_sigmas[l].iter_mut().zip(e.row(b).iter().zip(kappa.row(b))) {
                        *g += ev * kv;
                    }
                }
            }

            // ∂L/∂ξ̂ = hᵀ (e ∘ Σ)
            let es = e.scale_columns(layer.sigma)?;
            g_patterns[up].axpy(1.0, &h.t_matmul(&es)?)?;

            if l > 0 {
                let mut back = es.matmul_t(layer.xi_hat)?;
                let z = &cache.pre_activations[l - 1];
                for (b, &zv) in back.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if zv <= 0.0 {
                        *b = 0.0;
                    }
                }
                k = back;
            }
        }

        if l2 != 0.0 {
            for (g, p) in g_patterns.iter_mut().zip(&self.patterns) {
                g.axpy(l2, p)?;
            }
            if !self.sigma_frozen {
                for (g, s) in g_sigmas.iter_mut().zip(&self.sigmas) {
                    for (gv, &sv) in g.iter_mut().zip(s) {
                        *gv += l2 * sv;
                    }
                }
            }
        }
        Ok(ModeGradients {
            patterns: g_patterns,
            sigmas: g_sigmas,
        })
    }

    /// `θ ← θ − η ∇θ` on every trainable array.
    pub fn sgd_step(&mut self, grads: &ModeGradients, lr: f64) -> Result<()> {
        if grads.patterns.len() != self.patterns.len() || grads.sigmas.len() != self.sigmas.len() {
            return Err(Error::Consistency("gradient layout does not match the network".into()));
        }
        for (p, g) in self.patterns.iter_mut().zip(&grads.patterns) {
            p.axpy(-lr, g)?;
        }
        if !self.sigma_frozen {
            for (s, g) in self.sigmas.iter_mut().zip(&grads.sigmas) {
                if s.len() != g.len() {
                    return Err(Error::Consistency("importance gradient length mismatch".into()));
                }
                for (sv, &gv) in s.iter_mut().zip(g) {
                    *sv -= lr * gv;
                }
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let p: usize = self.patterns.iter().map(|m| m.rows() * m.cols()).sum();
        let s: usize = if self.sigma_frozen {
            0
        } else {
            self.sigmas.iter().map(Vec::len).sum()
        };
        p + s
    }
}

impl Model for MdlNetwork {
    fn head(&self) -> Head {
        self.head
    }

    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let mut cache = self.forward(x)?;
        let mut acts = std::mem::take(&mut cache.inputs);
        acts.push(cache.output);
        Ok(acts)
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.output)
    }

    fn half_sq_norm(&self) -> f64 {
        MdlNetwork::half_sq_norm(self)
    }

    fn train_step(&mut self, x: &Matrix, targets: &Matrix, lr: f64, l2: f64) -> Result<f64> {
        let cache = self.forward(x)?;
        let loss = self.loss(&cache, targets, l2)?;
        let grads = self.backward(&cache, targets, l2)?;
        self.sgd_step(&grads, lr)?;
        Ok(loss)
    }

    fn trainable_parameters(&self) -> usize {
        self.parameter_count()
    }
}

/// Initializes a mode network from `cfg.seed` and trains it.
pub fn train_mdl(
    widths: &[usize],
    mode_counts: &[usize],
    tying: Tying,
    head: Head,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(MdlNetwork, Vec<EpochMetrics>)> {
    let mut net = MdlNetwork::init(widths, mode_counts, tying, head, &mut RngState::new(cfg.seed))?;
    let history = train(&mut net, train_ds, test_ds, cfg)?;
    Ok((net, history))
}

/// Trainable parameter count of a mode network without building one.
pub fn mdl_parameter_count(widths: &[usize], mode_counts: &[usize], tying: Tying) -> usize {
    let layers = widths.len().saturating_sub(1);
    let untied: usize = (0..layers)
        .map(|l| mode_counts[l] * (widths[l] + 1 + widths[l + 1]))
        .sum();
    match tying {
        Tying::OneLayerTwoPatterns => untied,
        // Each hidden layer l stores one N_l × p pattern instead of two.
        Tying::OneLayerOnePattern => untied - (1..layers).map(|l| mode_counts[l] * widths[l]).sum::<usize>(),
    }
}
