pub mod analyze;
pub mod leastp;
pub mod theory;
pub mod train;

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::create_dir;

pub fn run_dir(out: &Path, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    create_dir(&out.join(&cfg.run_id))
}

/// Runs `job` for every seed on its own thread; results come back in seed order.
pub fn for_each_seed<T, F>(seeds: &[u64], job: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(u64) -> Result<T, CliError> + Sync,
{
    std::thread::scope(|s| {
        let job = &job;
        let handles: Vec<_> = seeds.iter().map(|&seed| s.spawn(move || job(seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}
