use super::mean_std;
use crate::baselines::train_bp;
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::modes::{train_mdl, Tying};
use crate::training::{EpochMetrics, Head, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct LeastPConfig {
    /// Hidden widths `N` of the `input-N-N-classes` architectures.
    pub widths: Vec<usize>,
    /// Ascending mode counts to try.
    pub p_grid: Vec<usize>,
    /// Accuracy tolerance below the dense reference.
    pub epsilon: f64,
    /// Seeds per cell: `train.seed, train.seed + 1, ...`.
    pub runs: usize,
    pub tying: Tying,
    pub train: TrainConfig,
}

impl Default for LeastPConfig {
    fn default() -> Self {
        LeastPConfig {
            widths: vec![50, 100, 200],
            p_grid: (1..=10).map(|k| 5 * k).collect(),
            epsilon: 0.002,
            runs: 1,
            tying: Tying::OneLayerTwoPatterns,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCell {
    pub width: usize,
    /// `None` for the dense reference.
    pub p: Option<usize>,
    pub mean_acc: f64,
    pub std_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastPTable {
    pub reference: Vec<AccuracyCell>,
    pub grid: Vec<AccuracyCell>,
    /// Smallest qualifying `p` per width; `None` means above the grid.
    pub least_p: Vec<(usize, Option<usize>)>,
}

fn final_accuracy(history: &[EpochMetrics]) -> f64 {
    history.last().map_or(0.0, |m| m.test_accuracy)
}

pub fn least_p_sweep(train_ds: &LabeledDataset, test_ds: &LabeledDataset, cfg: &LeastPConfig) -> Result<LeastPTable> {
    if cfg.runs == 0 {
        return Err(Error::Config("least-p sweep needs at least one run".into()));
    }
    if cfg.p_grid.is_empty() || cfg.p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("p grid must be non-empty and ascending, got {:?}", cfg.p_grid)));
    }
    let (input, classes) = (train_ds.input_dim(), train_ds.target_dim());
    let mut table = LeastPTable {
        reference: Vec::new(),
        grid: Vec::new(),
        least_p: Vec::new(),
    };
    for &n in &cfg.widths {
        let widths = [input, n, n, classes];
        let seeds = (0..cfg.runs as u64).map(|r| TrainConfig {
            seed: cfg.train.seed + r,
            ..cfg.train.clone()
        });
        let bp: Vec<f64> = seeds
            .clone()
            .map(|c| Ok(final_accuracy(&train_bp(&widths, Head::SoftmaxCrossEntropy, train_ds, test_ds, &c)?.1)))
            .collect::<Result<_>>()?;
        let (bp_mean, bp_std) = mean_std(&bp);
        log::info!("width {n}: dense reference accuracy {bp_mean:.4}");
        table.reference.push(AccuracyCell {
            width: n,
            p: None,
            mean_acc: bp_mean,
            std_acc: bp_std,
        });
        let mut least = None;
        for &p in &cfg.p_grid {
            let accs: Vec<f64> = seeds
                .clone()
                .map(|c| {
                    let (_, h) = train_mdl(&widths, &[p; 3], cfg.tying, Head::SoftmaxCrossEntropy, train_ds, test_ds, &c)?;
                    Ok(final_accuracy(&h))
                })
                .collect::<Result<_>>()?;
            let (mean, std) = mean_std(&accs);
            log::info!("width {n}, p {p}: accuracy {mean:.4}");
            if least.is_none() && mean >= bp_mean - cfg.epsilon {
                least = Some(p);
            }
            table.grid.push(AccuracyCell {
                width: n,
                p: Some(p),
                mean_acc: mean,
                std_acc: std,
            });
        }
        table.least_p.push((n, least));
    }
    Ok(table)
}
