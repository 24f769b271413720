use std::path::Path;

use mdl_core::analysis::mean_std;
use mdl_core::baselines::{train_bp, train_lrd, train_svd, SvdRegConfig};
use mdl_core::checkpoint::{save_checkpoint, Checkpoint};
use mdl_core::modes::train_mdl;
use mdl_core::training::EpochMetrics;

use super::{for_each_seed, run_dir};
use crate::config::{ExperimentConfig, Trainer};
use crate::data::{self, Data};
use crate::error::CliError;
use crate::output::{write_csv, write_text};

pub const METRICS_HEADER: [&str; 7] =
    ["run_id", "seed", "epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"];

pub const SUMMARY_HEADER: [&str; 10] = [
    "epoch",
    "seeds",
    "train_loss_mean",
    "train_loss_std",
    "train_accuracy_mean",
    "train_accuracy_std",
    "test_loss_mean",
    "test_loss_std",
    "test_accuracy_mean",
    "test_accuracy_std",
];

fn train_one(cfg: &ExperimentConfig, data: &Data, seed: u64) -> Result<(Checkpoint, Vec<EpochMetrics>), CliError> {
    let tc = cfg.train_config(seed);
    let (train, test) = (&data.train, &data.test);
    Ok(match cfg.trainer {
        Trainer::Mdl => {
            let (net, h) = train_mdl(&cfg.widths, &cfg.modes, cfg.tying, data.head, train, test, &tc)?;
            (Checkpoint::Mdl(net), h)
        }
        Trainer::Lrd => {
            let (net, h) = train_lrd(&cfg.widths, &cfg.modes, data.head, train, test, &tc)?;
            (Checkpoint::Mdl(net), h)
        }
        Trainer::Bp => {
            let (net, h) = train_bp(&cfg.widths, data.head, train, test, &tc)?;
            (Checkpoint::Dense(net), h)
        }
        Trainer::Svd => {
            let reg = SvdRegConfig {
                lambda_o: cfg.lambda_o,
                lambda_s: cfg.lambda_s,
            };
            let (net, h) = train_svd(&cfg.widths, data.head, reg, train, test, &tc)?;
            (Checkpoint::Svd(net), h)
        }
    })
}

fn metrics_rows(run_id: &str, seed: u64, history: &[EpochMetrics]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|m| {
            vec![
                run_id.to_string(),
                seed.to_string(),
                m.epoch.to_string(),
                m.train_loss.to_string(),
                m.train_accuracy.to_string(),
                m.test_loss.to_string(),
                m.test_accuracy.to_string(),
            ]
        })
        .collect()
}

/// Per-epoch mean and sample standard deviation across seeds.
pub fn summary_rows(histories: &[Vec<EpochMetrics>]) -> Vec<Vec<String>> {
    let epochs = histories.iter().map(Vec::len).min().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let col = |f: fn(&EpochMetrics) -> f64| -> Vec<f64> { histories.iter().map(|h| f(&h[e])).collect() };
            let mut row = vec![histories[0][e].epoch.to_string(), histories.len().to_string()];
            for values in [
                col(|m| m.train_loss),
                col(|m| m.train_accuracy),
                col(|m| m.test_loss),
                col(|m| m.test_accuracy),
            ] {
                let (mean, std) = mean_std(&values);
                row.push(mean.to_string());
                row.push(std.to_string());
            }
            row
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let data = data::load(cfg)?;
    data::check_widths(&cfg.widths, &data)?;
    let dir = run_dir(out, cfg)?;
    let results = for_each_seed(&cfg.seeds, |seed| {
        log::info!("training {} seed {seed}", cfg.trainer.name());
        train_one(cfg, &data, seed)
    })?;
    let mut histories = Vec::with_capacity(results.len());
    for (&seed, (ckpt, history)) in cfg.seeds.iter().zip(results) {
        write_csv(
            &dir.join(format!("metrics_seed{seed}.csv")),
            &METRICS_HEADER,
            &metrics_rows(&cfg.run_id, seed, &history),
        )?;
        save_checkpoint(&ckpt, &dir.join(format!("checkpoint_seed{seed}.bin")))?;
        if let Some(last) = history.last() {
            log::info!("seed {seed}: final test accuracy {:.4}", last.test_accuracy);
        }
        histories.push(history);
    }
    write_csv(&dir.join("summary.csv"), &SUMMARY_HEADER, &summary_rows(&histories))?;
    write_text(&dir.join("config.echo"), cfg.echo())
}
