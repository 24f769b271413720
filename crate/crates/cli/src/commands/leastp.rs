use std::path::Path;

use mdl_core::analysis::report::{write_least_p_csv, write_least_p_grid_csv};
use mdl_core::analysis::{least_p_sweep, LeastPConfig};

use super::run_dir;
use crate::config::{ExperimentConfig, Task};
use crate::data;
use crate::error::CliError;
use crate::output::{create_dir, write_text};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    if cfg.task != Task::Mnist {
        return Err(CliError::Usage("config key `task`: leastp compares classifiers and needs task = mnist".into()));
    }
    let data = data::load(cfg)?;
    let sweep = LeastPConfig {
        widths: cfg.leastp_widths.clone(),
        p_grid: cfg.leastp_grid.clone(),
        epsilon: cfg.leastp_epsilon,
        runs: cfg.leastp_runs,
        tying: cfg.tying,
        train: cfg.train_config(cfg.seeds[0]),
    };
    let table = least_p_sweep(&data.train, &data.test, &sweep)?;
    let dir = run_dir(out, cfg)?;
    let analysis = create_dir(&dir.join("analysis"))?;
    write_least_p_csv(&analysis.join("leastp.csv"), &table)?;
    write_least_p_grid_csv(&analysis.join("leastp_grid.csv"), &table)?;
    write_text(&dir.join("config.echo"), cfg.echo())
}
