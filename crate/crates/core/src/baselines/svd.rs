//! Weight matrices trained in factorized form `w = U diag(s) Vᵀ`, with a
//! penalty pulling `U` and `V` towards orthonormal columns and a sparsity
//! penalty on `s`.

use super::dense::{check_widths, dense_forward, dense_weight_gradients, DenseNetwork};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, thin_svd, Matrix, RngState};
use crate::training::{train, EpochMetrics, Head, Model, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SvdLayer {
    /// `N_l × r`.
    pub u: Matrix,
    /// Length `r`, kept non-negative.
    pub s: Vec<f64>,
    /// `N_{l+1} × r`.
    pub v: Matrix,
}

/// Penalty strengths: `λ_o` for orthogonality, `λ_s` for sparsity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SvdRegConfig {
    pub lambda_o: f64,
    pub lambda_s: f64,
}

impl SvdRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_o >= 0.0) || !(self.lambda_s >= 0.0) {
            return Err(Error::Config(format!(
                "penalty strengths must be >= 0, got lambda_o={} lambda_s={}",
                self.lambda_o, self.lambda_s
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdPenalties {
    /// `(1/r²)(‖UᵀU − I‖² + ‖VᵀV − I‖²)`.
    pub orthogonality: f64,
    /// `‖s‖₁ / ‖s‖₂`; zero when `s` vanishes.
    pub sparsity: f64,
    /// Set when `s` is identically zero and the ratio is undefined.
    pub sparsity_undefined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdGradients {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

fn gram_defect(m: &Matrix) -> Matrix {
    let mut g = m.t_matmul(m).expect("square gram");
    for i in 0..g.rows() {
        g[(i, i)] -= 1.0;
    }
    g
}

impl SvdLayer {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn compose_weight(&self) -> Matrix {
        self.u
            .scale_columns(&self.s)
            .and_then(|m| m.matmul_t(&self.v))
            .expect("svd layer shapes are consistent")
    }

    /// `‖UᵀU − I‖_F`.
    pub fn u_orthogonality_residual(&self) -> f64 {
        gram_defect(&self.u).frobenius_norm()
    }

    fn check(&self) -> Result<()> {
        let r = self.s.len();
        if self.u.cols() != r || self.v.cols() != r {
            return Err(Error::Consistency(format!(
                "svd layer with u {:?}, {} values, v {:?}",
                self.u.shape(),
                r,
                self.v.shape()
            )));
        }
        Ok(())
    }

    fn parameter_count(&self) -> usize {
        self.u.rows() * self.u.cols() + self.s.len() + self.v.rows() * self.v.cols()
    }
}

pub fn svd_losses(layer: &SvdLayer) -> SvdPenalties {
    let r = layer.rank() as f64;
    let orthogonality = (gram_defect(&layer.u).sum_squares() + gram_defect(&layer.v).sum_squares()) / (r * r);
    let l1: f64 = layer.s.iter().map(|x| x.abs()).sum();
    let l2 = norm(&layer.s);
    let (sparsity, sparsity_undefined) = if l2 == 0.0 { (0.0, true) } else { (l1 / l2, false) };
    SvdPenalties {
        orthogonality,
        sparsity,
        sparsity_undefined,
    }
}

/// Gradient of `λ_o L_o + λ_s L_s` alone.
pub fn svd_penalty_gradients(layer: &SvdLayer, reg: &SvdRegConfig) -> SvdGradients {
    let r = layer.rank() as f64;
    let c = 4.0 * reg.lambda_o / (r * r);
    let u = layer.u.matmul(&gram_defect(&layer.u)).expect("shapes").scaled(c);
    let v = layer.v.matmul(&gram_defect(&layer.v)).expect("shapes").scaled(c);
    let l1: f64 = layer.s.iter().map(|x| x.abs()).sum();
    let l2 = norm(&layer.s);
    let s = if l2 == 0.0 || reg.lambda_s == 0.0 {
        vec![0.0; layer.s.len()]
    } else {
        layer
            .s
            .iter()
            .map(|&si| {
                let sign = if si > 0.0 {
                    1.0
                } else if si < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                reg.lambda_s * (sign / l2 - l1 * si / (l2 * l2 * l2))
            })
            .collect()
    };
    SvdGradients { u, s, v }
}

/// Total factor gradients given `G = ∂L/∂w` for this layer: the chain rule
/// through `w = U diag(s) Vᵀ` plus both penalties.
pub fn svd_gradients(layer: &SvdLayer, weight_grad: &Matrix, reg: &SvdRegConfig) -> Result<SvdGradients> {
    layer.check()?;
    if weight_grad.shape() != (layer.u.rows(), layer.v.rows()) {
        return Err(Error::Shape {
            op: "svd_gradients",
            left: weight_grad.shape(),
            right: (layer.u.rows(), layer.v.rows()),
        });
    }
    let gv = weight_grad.matmul(&layer.v)?;
    let gtu = weight_grad.t_matmul(&layer.u)?;
    let mut grads = svd_penalty_gradients(layer, reg);
    grads.u.axpy(1.0, &gv.scale_columns(&layer.s)?)?;
    grads.v.axpy(1.0, &gtu.scale_columns(&layer.s)?)?;
    for (i, g) in grads.s.iter_mut().enumerate() {
        *g += dot(&layer.u.column(i), &gv.column(i));
    }
    Ok(grads)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdNetwork {
    widths: Vec<usize>,
    head: Head,
    layers: Vec<SvdLayer>,
    reg: SvdRegConfig,
}

impl SvdNetwork {
    /// Factors start as the thin SVD of a random dense initialization.
    pub fn init(widths: &[usize], head: Head, reg: SvdRegConfig, rng: &mut RngState) -> Result<Self> {
        reg.validate()?;
        let dense = DenseNetwork::init(widths, head, rng)?;
        let layers = dense
            .weights()
            .iter()
            .map(|w| {
                let svd = thin_svd(w)?;
                Ok(SvdLayer {
                    u: svd.u,
                    s: svd.s,
                    v: svd.v,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvdNetwork {
            widths: widths.to_vec(),
            head,
            layers,
            reg,
        })
    }

    pub fn from_layers(head: Head, reg: SvdRegConfig, layers: Vec<SvdLayer>) -> Result<Self> {
        reg.validate()?;
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].u.rows()];
        for layer in &layers {
            layer.check()?;
            if layer.u.rows() != *widths.last().unwrap() {
                return Err(Error::Consistency("svd layer shapes do not chain".into()));
            }
            widths.push(layer.v.rows());
        }
        check_widths(&widths)?;
        Ok(SvdNetwork {
            widths,
            head,
            layers,
            reg,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[SvdLayer] {
        &self.layers
    }

    pub fn reg(&self) -> SvdRegConfig {
        self.reg
    }

    pub fn composed_weights(&self) -> Vec<Matrix> {
        self.layers.iter().map(SvdLayer::compose_weight).collect()
    }

    fn penalty(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                let p = svd_losses(l);
                self.reg.lambda_o * p.orthogonality + self.reg.lambda_s * p.sparsity
            })
            .sum()
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
}

impl Model for SvdNetwork {
    fn head(&self) -> Head {
        self.head
    }

    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        self.check_input(x)?;
        let cache = dense_forward(&self.composed_weights(), self.head, x)?;
        let mut acts = cache.inputs;
        acts.push(cache.output);
        Ok(acts)
    }

    fn half_sq_norm(&self) -> f64 {
        0.5 * self
            .layers
            .iter()
            .map(|l| l.u.sum_squares() + l.v.sum_squares() + l.s.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
    }

    fn extra_penalty(&self) -> f64 {
        self.penalty()
    }

    /// Step on the full objective, then clamp `s` at zero.
    fn train_step(&mut self, x: &Matrix, targets: &Matrix, lr: f64, l2: f64) -> Result<f64> {
        self.check_input(x)?;
        let weights = self.composed_weights();
        let cache = dense_forward(&weights, self.head, x)?;
        let objective =
            self.head.data_loss(&cache.output, targets)? + l2 * Model::half_sq_norm(self) + self.penalty();
        let weight_grads = dense_weight_gradients(&weights, self.head, &cache, targets)?;
        for (layer, g) in self.layers.iter_mut().zip(&weight_grads) {
            let mut grads = svd_gradients(layer, g, &self.reg)?;
            if l2 != 0.0 {
                grads.u.axpy(l2, &layer.u)?;
                grads.v.axpy(l2, &layer.v)?;
                for (gs, &s) in grads.s.iter_mut().zip(&layer.s) {
                    *gs += l2 * s;
                }
            }
            layer.u.axpy(-lr, &grads.u)?;
            layer.v.axpy(-lr, &grads.v)?;
            for (s, gs) in layer.s.iter_mut().zip(&grads.s) {
                *s = (*s - lr * gs).max(0.0);
            }
        }
        Ok(objective)
    }

    fn trainable_parameters(&self) -> usize {
        self.layers.iter().map(SvdLayer::parameter_count).sum()
    }
}

/// `Σ_l [N_l N_{l+1} + r_l² + r_l]` with `r_l = min(N_l, N_{l+1})`.
pub fn svd_parameter_count(widths: &[usize]) -> usize {
    widths
        .windows(2)
        .map(|w| {
            let r = w[0].min(w[1]);
            w[0] * w[1] + r * r + r
        })
        .sum()
}

/// Keeps the `⌈keep · r⌉` components of largest `|s|` in every layer except
/// the output layer.
pub fn prune_svd(net: &SvdNetwork, keep_fraction: f64) -> Result<SvdNetwork> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::validation(format!("keep fraction must be in (0, 1], got {keep_fraction}")));
    }
    let last = net.layers.len() - 1;
    let layers = net
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            if l == last {
                return layer.clone();
            }
            let r = layer.rank();
            let keep = ((keep_fraction * r as f64).ceil() as usize).clamp(1, r);
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&a, &b| layer.s[b].abs().total_cmp(&layer.s[a].abs()));
            let mut kept = order[..keep].to_vec();
            kept.sort_unstable();
            SvdLayer {
                u: layer.u.select_columns(&kept),
                s: kept.iter().map(|&i| layer.s[i]).collect(),
                v: layer.v.select_columns(&kept),
            }
        })
        .collect();
    Ok(SvdNetwork {
        widths: net.widths.clone(),
        head: net.head,
        layers,
        reg: net.reg,
    })
}

/// Initializes an SVD network from `cfg.seed` and trains it.
pub fn train_svd(
    widths: &[usize],
    head: Head,
    reg: SvdRegConfig,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(SvdNetwork, Vec<EpochMetrics>)> {
    let mut net = SvdNetwork::init(widths, head, reg, &mut RngState::new(cfg.seed))?;
    let history = train(&mut net, train_ds, test_ds, cfg)?;
    Ok((net, history))
}
