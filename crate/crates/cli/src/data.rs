//! Dataset loading for the configured task.

use mdl_core::datasets::{load_idx, sample_mixture, GaussianMixtureSpec, LabeledDataset, TargetKind};
use mdl_core::linalg::RngState;
use mdl_core::training::Head;

use crate::config::{ExperimentConfig, Task};
use crate::error::CliError;

pub struct Data {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub head: Head,
}

const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

pub fn head_for(task: Task) -> Head {
    match task {
        Task::Mixture => Head::IdentityMse,
        _ => Head::SoftmaxCrossEntropy,
    }
}

pub fn load(cfg: &ExperimentConfig) -> Result<Data, CliError> {
    let head = head_for(cfg.task);
    let (train, test) = match cfg.task {
        Task::Mnist => {
            let paths: Vec<_> = MNIST_FILES.iter().map(|f| cfg.mnist_dir.join(f)).collect();
            if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
                return Err(CliError::Usage(format!(
                    "config key `mnist_dir`: MNIST file not found: {}",
                    missing.display()
                )));
            }
            let train = load_idx(&paths[0], &paths[1])?;
            let train = if cfg.train_subset > 0 { train.head(cfg.train_subset) } else { train };
            (train, load_idx(&paths[2], &paths[3])?)
        }
        Task::Mixture => {
            let spec = GaussianMixtureSpec {
                variance: cfg.mixture_variance,
                ..GaussianMixtureSpec::default()
            };
            let root = RngState::new(cfg.data_seed);
            let train = sample_mixture(&spec, cfg.mixture_train, TargetKind::Signed, &mut root.split(1))?;
            let test = sample_mixture(&spec, cfg.mixture_test, TargetKind::Signed, &mut root.split(2))?;
            (train, test)
        }
        Task::TeacherStudent => {
            return Err(CliError::Usage(
                "config key `task`: teacher_student has no dataset; use the theory subcommand".into(),
            ))
        }
    };
    Ok(Data { train, test, head })
}

/// Checks that the configured architecture fits the data.
pub fn check_widths(widths: &[usize], data: &Data) -> Result<(), CliError> {
    let (input, output) = (data.train.input_dim(), data.train.target_dim());
    if widths[0] != input || widths[widths.len() - 1] != output {
        return Err(CliError::Usage(format!(
            "config key `widths`: data needs input width {input} and output width {output}, got {widths:?}"
        )));
    }
    Ok(())
}
