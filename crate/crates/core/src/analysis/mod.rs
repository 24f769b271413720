//! Post-training analysis: mode importance and pruning, pattern geometry,
//! class-subspace overlap, power-law fits of ranked spectra, and the
//! least-mode-count sweep.

mod geometry;
mod powerlaw;
mod ranking;
pub mod report;
mod stages;
mod sweep;

pub use geometry::{
    class_subspace, dispersion_profile, overlap_profile, pattern_dispersion, subspace_overlap, ClassSubspace,
    LayerOverlap, OverlapOptions, PatternSide,
};
pub use powerlaw::{fit_piecewise_powerlaw, PowerLawFit, MIN_SEGMENT};
pub use ranking::{
    descending_order, prune_and_evaluate, prune_modes, pruning_curve, sigma_ranking, tau_ranking, top_k_overlap,
    LayerRanking, ModeRanking, PruneProtocol, PruneStyle, PruningPoint,
};
pub use stages::{projection_stages, ProjectionStages};
pub use sweep::{least_p_sweep, AccuracyCell, LeastPConfig, LeastPTable};

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
