//! Four-component two-dimensional Gaussian mixture for the toy classification task.

use super::{LabeledDataset, TargetKind};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, RngState};

/// `means[label][component]`, where label 0 is `t = +1` and label 1 is
/// `t = -1`; component 0 is the `+` branch.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixtureSpec {
    pub means: [[[f64; 2]; 2]; 2],
    /// Shared isotropic variance.
    pub variance: f64,
    /// `P(t = +1)`.
    pub label_prior: f64,
    /// `P(+)` within a label.
    pub component_prior: f64,
}

impl Default for GaussianMixtureSpec {
    fn default() -> Self {
        GaussianMixtureSpec {
            means: [[[0.5, 0.5], [-0.5, -0.5]], [[-0.5, 0.5], [0.5, -0.5]]],
            variance: 0.05,
            label_prior: 0.5,
            component_prior: 0.5,
        }
    }
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::validation(format!("mixture variance must be > 0, got {}", self.variance)));
        }
        for p in [self.label_prior, self.component_prior] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("prior {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Draws `n` labelled points. `kind` selects one-hot (two classes) or signed ±1 targets.
pub fn sample_mixture(
    spec: &GaussianMixtureSpec,
    n: usize,
    kind: TargetKind,
    rng: &mut RngState,
) -> Result<LabeledDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::validation("sample_mixture needs n >= 1"));
    }
    let sd = spec.variance.sqrt();
    let mut inputs = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(rng.uniform() >= spec.label_prior);
        let comp = usize::from(rng.uniform() >= spec.component_prior);
        let mu = spec.means[label][comp];
        inputs[(i, 0)] = mu[0] + sd * rng.normal();
        inputs[(i, 1)] = mu[1] + sd * rng.normal();
        labels.push(label);
    }
    match kind {
        TargetKind::OneHot => LabeledDataset::from_labels(inputs, &labels, 2),
        TargetKind::Signed => {
            let t = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
            LabeledDataset::new(inputs, Matrix::from_vec(n, 1, t)?, TargetKind::Signed)
        }
    }
}
