use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::RngState;
use crate::modes::{MdlNetwork, Tying};
use crate::training::{evaluate, Evaluation};

/// Importance measures of one layer's modes.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRanking {
    /// `Σ|Σ_α| / Σ(‖ξ_α‖ + ‖ξ̂_α‖)`, or 0 when every pattern vanishes.
    pub gamma: f64,
    /// `τ_α = γ‖ξ_α‖ + γ‖ξ̂_α‖ + |Σ_α|`.
    pub tau: Vec<f64>,
    pub sigma_abs: Vec<f64>,
    /// Mode indices sorted by descending `τ`, ties by index.
    pub order: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeRanking {
    pub layers: Vec<LayerRanking>,
}

/// Indices sorted by descending score, ties broken by lower index.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn tau_ranking(net: &MdlNetwork) -> ModeRanking {
    let layers = (0..net.num_layers())
        .map(|l| {
            let layer = net.layer(l);
            let p = layer.modes();
            let pattern_norms: Vec<f64> = (0..p)
                .map(|a| layer.xi.column_norm(a) + layer.xi_hat.column_norm(a))
                .collect();
            let sigma_abs: Vec<f64> = layer.sigma.iter().map(|s| s.abs()).collect();
            let denom: f64 = pattern_norms.iter().sum();
            let gamma = if denom > 0.0 { sigma_abs.iter().sum::<f64>() / denom } else { 0.0 };
            let tau: Vec<f64> = pattern_norms.iter().zip(&sigma_abs).map(|(n, s)| gamma * n + s).collect();
            LayerRanking {
                gamma,
                order: descending_order(&tau),
                tau,
                sigma_abs,
            }
        })
        .collect();
    ModeRanking { layers }
}

/// Per-layer mode order by `|Σ_α|` alone.
pub fn sigma_ranking(net: &MdlNetwork) -> Vec<Vec<usize>> {
    net.sigmas()
        .iter()
        .map(|s| descending_order(&s.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        .collect()
}

/// Fraction of the first `k` entries shared by two orderings.
pub fn top_k_overlap(a: &[usize], b: &[usize], k: usize) -> f64 {
    let k = k.min(a.len()).min(b.len());
    if k == 0 {
        return 0.0;
    }
    let shared = a[..k].iter().filter(|x| b[..k].contains(x)).count();
    shared as f64 / k as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneProtocol {
    /// Remove modes in ascending order of `τ`.
    WeakestFirst,
    /// Remove a uniformly random subset.
    Random,
}

impl PruneProtocol {
    pub fn name(self) -> &'static str {
        match self {
            PruneProtocol::WeakestFirst => "weakest_first",
            PruneProtocol::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneStyle {
    /// Delete the triplets; tied networks fall back to [`PruneStyle::ZeroSigma`].
    Remove,
    /// Keep the shapes and set the importances to zero.
    ZeroSigma,
}

/// Prunes `⌊fraction · p_l⌋` modes in each listed layer.
pub fn prune_modes(
    net: &MdlNetwork,
    layers: &[usize],
    fraction: f64,
    protocol: PruneProtocol,
    style: PruneStyle,
    rng: &mut RngState,
) -> Result<MdlNetwork> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::validation(format!("prune fraction must be in [0, 1], got {fraction}")));
    }
    if let Some(&bad) = layers.iter().find(|&&l| l >= net.num_layers()) {
        return Err(Error::validation(format!("layer {bad} out of range")));
    }
    let ranking = tau_ranking(net);
    let mut pruned = net.clone();
    for &l in layers {
        let p = net.sigmas()[l].len();
        let count = (fraction * p as f64 + 1e-9).floor() as usize;
        let count = count.min(p);
        let drop: Vec<usize> = match protocol {
            PruneProtocol::WeakestFirst => ranking.layers[l].order.iter().rev().take(count).copied().collect(),
            PruneProtocol::Random => rng.subset(p, count),
        };
        match (style, net.tying()) {
            (PruneStyle::Remove, Tying::OneLayerTwoPatterns) => pruned.remove_modes(l, &drop)?,
            _ => pruned.zero_modes(l, &drop)?,
        }
    }
    Ok(pruned)
}

/// One point of a pruning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct PruningPoint {
    pub protocol: PruneProtocol,
    pub fraction: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Test accuracy after pruning at each fraction with both protocols;
/// random removal is averaged over `random_draws` subsets.
pub fn pruning_curve(
    net: &MdlNetwork,
    layers: &[usize],
    fractions: &[f64],
    random_draws: usize,
    ds: &LabeledDataset,
    rng: &mut RngState,
) -> Result<Vec<PruningPoint>> {
    let mut points = Vec::new();
    for &f in fractions {
        let weakest = prune_modes(net, layers, f, PruneProtocol::WeakestFirst, PruneStyle::Remove, rng)?;
        points.push(PruningPoint {
            protocol: PruneProtocol::WeakestFirst,
            fraction: f,
            mean_accuracy: evaluate(&weakest, ds)?.accuracy,
            std_accuracy: 0.0,
        });
    }
    for &f in fractions {
        let mut accs = Vec::with_capacity(random_draws);
        for _ in 0..random_draws.max(1) {
            let pruned = prune_modes(net, layers, f, PruneProtocol::Random, PruneStyle::Remove, rng)?;
            accs.push(evaluate(&pruned, ds)?.accuracy);
        }
        let (mean, std) = super::mean_std(&accs);
        points.push(PruningPoint {
            protocol: PruneProtocol::Random,
            fraction: f,
            mean_accuracy: mean,
            std_accuracy: std,
        });
    }
    Ok(points)
}

/// Prunes then evaluates.
pub fn prune_and_evaluate(
    net: &MdlNetwork,
    layers: &[usize],
    fraction: f64,
    protocol: PruneProtocol,
    rng: &mut RngState,
    ds: &LabeledDataset,
) -> Result<(MdlNetwork, Evaluation)> {
    let pruned = prune_modes(net, layers, fraction, protocol, PruneStyle::Remove, rng)?;
    let eval = evaluate(&pruned, ds)?;
    Ok((pruned, eval))
}
