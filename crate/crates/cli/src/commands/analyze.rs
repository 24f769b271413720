use std::path::{Path, PathBuf};

use mdl_core::analysis::report::{
    write_dispersion_csv, write_overlap_csv, write_powerlaw_csv, write_projection_stages_csv, write_pruning_csv,
    write_ranking_csv,
};
use mdl_core::analysis::{
    dispersion_profile, fit_piecewise_powerlaw, overlap_profile, projection_stages, pruning_curve, tau_ranking,
    OverlapOptions, PatternSide, MIN_SEGMENT,
};
use mdl_core::checkpoint::{load_checkpoint, Checkpoint};
use mdl_core::linalg::RngState;
use mdl_core::modes::MdlNetwork;

use super::run_dir;
use crate::config::ExperimentConfig;
use crate::data::{self, Data};
use crate::error::CliError;
use crate::output::{create_dir, write_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Analysis {
    /// Modes ranked by importance.
    Rank,
    /// Accuracy after weakest-first and random mode removal.
    Prune,
    /// Pattern-cloud dispersion per layer.
    Dispersion,
    /// Class-subspace overlap per hidden layer.
    Overlap,
    /// Two-segment power-law fit of the ranked importances.
    Powerlaw,
    /// First-layer projection, weighting and mapping of the test inputs.
    Stages,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Rank => "rank",
            Analysis::Prune => "prune",
            Analysis::Dispersion => "dispersion",
            Analysis::Overlap => "overlap",
            Analysis::Powerlaw => "powerlaw",
            Analysis::Stages => "stages",
        }
    }
}

fn mode_network(ckpt: &Checkpoint, kind: Analysis) -> Result<&MdlNetwork, CliError> {
    match ckpt {
        Checkpoint::Mdl(net) => Ok(net),
        other => Err(CliError::Usage(format!(
            "{} analyzes modes, but the checkpoint holds a {} network without mode parameters",
            kind.name(),
            other.kind_name()
        ))),
    }
}

fn test_data(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> Result<Data, CliError> {
    let data = data::load(cfg)?;
    if data.test.input_dim() != ckpt.widths()[0] {
        return Err(CliError::Usage(format!(
            "config key `task`: test inputs have width {} but the checkpoint expects {}",
            data.test.input_dim(),
            ckpt.widths()[0]
        )));
    }
    Ok(data)
}

pub fn run(cfg: &ExperimentConfig, kind: Analysis, checkpoint: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let path: PathBuf = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| cfg.checkpoint.clone())
        .ok_or_else(|| CliError::Usage("analyze needs a checkpoint: pass --checkpoint or set `checkpoint`".into()))?;
    let ckpt = load_checkpoint(&path)?;
    let needs_data = matches!(kind, Analysis::Prune | Analysis::Overlap | Analysis::Stages);
    if kind != Analysis::Overlap {
        mode_network(&ckpt, kind)?;
    }
    let data = if needs_data { Some(test_data(cfg, &ckpt)?) } else { None };

    let dir = create_dir(&run_dir(out, cfg)?.join("analysis"))?;
    let target = dir.join(format!("{}.csv", kind.name()));
    match kind {
        Analysis::Rank => write_ranking_csv(&target, &tau_ranking(mode_network(&ckpt, kind)?))?,
        Analysis::Prune => {
            let net = mode_network(&ckpt, kind)?;
            let layers = cfg.prune_layers.clone().unwrap_or_else(|| (0..net.num_layers()).collect());
            let mut rng = RngState::new(cfg.prune_seed);
            let ds = &data.as_ref().expect("loaded").test;
            let curve = pruning_curve(net, &layers, &cfg.prune_fractions, cfg.prune_draws, ds, &mut rng)?;
            write_pruning_csv(&target, &curve)?;
        }
        Analysis::Dispersion => {
            let side = if cfg.dispersion_upstream { PatternSide::Upstream } else { PatternSide::Downstream };
            write_dispersion_csv(&target, &dispersion_profile(mode_network(&ckpt, kind)?, side))?;
        }
        Analysis::Overlap => {
            let opts = OverlapOptions {
                threshold: cfg.overlap_threshold,
                include_input: cfg.overlap_include_input,
            };
            let profile = overlap_profile(ckpt.as_model(), &data.as_ref().expect("loaded").test, &opts)?;
            write_overlap_csv(&target, &profile)?;
        }
        Analysis::Powerlaw => {
            let ranking = tau_ranking(mode_network(&ckpt, kind)?);
            let mut fits = Vec::new();
            for (l, layer) in ranking.layers.iter().enumerate() {
                let sorted: Vec<f64> = layer.order.iter().map(|&a| layer.tau[a]).filter(|t| *t > 0.0).collect();
                if sorted.len() < 2 * MIN_SEGMENT {
                    log::warn!("layer {l}: {} positive importances, too few for a two-segment fit", sorted.len());
                    continue;
                }
                fits.push((l, fit_piecewise_powerlaw(&sorted)?));
            }
            if fits.is_empty() {
                return Err(CliError::Usage(format!(
                    "powerlaw needs a layer with at least {} nonzero modes",
                    2 * MIN_SEGMENT
                )));
            }
            write_powerlaw_csv(&target, &fits)?;
        }
        Analysis::Stages => {
            let net = mode_network(&ckpt, kind)?;
            let test = &data.as_ref().expect("loaded").test;
            let ds = if cfg.stages_samples > 0 { test.head(cfg.stages_samples) } else { test.clone() };
            let stages = projection_stages(net, ds.inputs())?;
            write_projection_stages_csv(&target, &stages, &ds.classes())?;
        }
    }
    write_text(&dir.join(format!("{}.config.echo", kind.name())), cfg.echo())
}
