//! Comparison models: plain weight-space training, factorized SVD training,
//! and the low-rank restriction of the mode network with `Σ` fixed to ones.

mod dense;
mod svd;

pub use dense::{dense_parameter_count, train_bp, DenseNetwork};
pub use svd::{
    prune_svd, svd_gradients, svd_losses, svd_parameter_count, svd_penalty_gradients, train_svd, SvdGradients,
    SvdLayer, SvdNetwork, SvdPenalties, SvdRegConfig,
};

use crate::datasets::LabeledDataset;
use crate::error::Result;
use crate::linalg::RngState;
use crate::modes::{MdlNetwork, Tying};
use crate::training::{train, EpochMetrics, Head, TrainConfig};

/// Low-rank network `w = ξ̂ ξᵀ`: an untied mode network whose `Σ` is all
/// ones and never trained.
///
/// Draws exactly what [`MdlNetwork::init`] draws and folds the random
/// importances into `ξ̂`, so the starting function is the mode network's.
pub fn make_lrd(widths: &[usize], mode_counts: &[usize], head: Head, rng: &mut RngState) -> Result<MdlNetwork> {
    let mut net = MdlNetwork::init(widths, mode_counts, Tying::OneLayerTwoPatterns, head, rng)?;
    net.absorb_sigma_and_freeze()?;
    Ok(net)
}

pub fn train_lrd(
    widths: &[usize],
    mode_counts: &[usize],
    head: Head,
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(MdlNetwork, Vec<EpochMetrics>)> {
    let mut net = make_lrd(widths, mode_counts, head, &mut RngState::new(cfg.seed))?;
    let history = train(&mut net, train_ds, test_ds, cfg)?;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::training::Model;

    #[test]
    fn lrd_sigma_stays_ones_and_gradients_check() {
        let mut net = make_lrd(&[5, 4, 3], &[2, 2], Head::IdentityMse, &mut RngState::new(1)).unwrap();
        let x = gaussian_matrix(6, 5, &mut RngState::new(2)).unwrap();
        let t = gaussian_matrix(6, 3, &mut RngState::new(3)).unwrap();
        let l2 = 1e-3;
        let g = net.backward(&net.forward(&x).unwrap(), &t, l2).unwrap();
        assert!(g.sigmas.iter().flatten().all(|&v| v == 0.0));
        let h = 1e-6;
        let obj = |n: &MdlNetwork| n.loss(&n.forward(&x).unwrap(), &t, l2).unwrap();
        for slot in 0..net.patterns().len() {
            for i in 0..net.patterns()[slot].as_slice().len() {
                let mut p = net.clone();
                p.pattern_mut(slot).as_mut_slice()[i] += h;
                let mut m = net.clone();
                m.pattern_mut(slot).as_mut_slice()[i] -= h;
                let numeric = (obj(&p) - obj(&m)) / (2.0 * h);
                let analytic = g.patterns[slot].as_slice()[i];
                let scale = analytic.abs().max(numeric.abs()).max(1e-8);
                assert!((analytic - numeric).abs() / scale < 1e-5);
            }
        }
        for _ in 0..10 {
            net.train_step(&x, &t, 0.05, l2).unwrap();
        }
        assert!(net.sigmas().iter().flatten().all(|&s| s == 1.0));
        assert_eq!(net.parameter_count(), 2 * (5 + 4) + 2 * (4 + 3));
    }
}
