//! Flat `key = value` experiment configuration.
//!
//! Every key has a default; a few depend on `task`. The resolved set is
//! echoed in declaration order, so the echo can be fed back with `--config`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mdl_core::modes::Tying;
use mdl_core::training::TrainConfig;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Mnist,
    Mixture,
    TeacherStudent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainer {
    Mdl,
    Bp,
    Svd,
    Lrd,
}

impl Trainer {
    pub fn name(self) -> &'static str {
        match self {
            Trainer::Mdl => "mdl",
            Trainer::Bp => "bp",
            Trainer::Svd => "svd",
            Trainer::Lrd => "lrd",
        }
    }
}

struct KeySpec {
    key: &'static str,
    help: &'static str,
    default: fn(Task) -> &'static str,
}

macro_rules! keys {
    ($($key:literal => $default:expr, $help:literal;)*) => {
        const KEYS: &[KeySpec] = &[$(KeySpec { key: $key, help: $help, default: $default }),*];
    };
}

keys! {
    "task" => |_| "mnist", "mnist | mixture | teacher_student";
    "run_id" => |_| "", "output subdirectory; empty means <task>-<trainer>";
    "trainer" => |_| "mdl", "mdl | bp | svd | lrd";
    "widths" => |t| match t { Task::Mixture => "2,8,1", _ => "784,100,100,10" }, "layer widths, input first";
    "modes" => |t| match t { Task::Mixture => "3", _ => "30" }, "mode count per layer, or one value for all";
    "tying" => |_| "1l2p", "1l2p (two patterns per layer) | 1l1p (shared patterns)";
    "learning_rate" => |_| "0.02", "SGD step size";
    "batch_size" => |t| match t { Task::Mixture => "16", _ => "128" }, "minibatch size";
    "epochs" => |t| match t { Task::Mixture => "200", _ => "30" }, "training epochs";
    "l2" => |_| "0.0001", "strength of the (l2/2)|theta|^2 penalty";
    "lambda_o" => |_| "0.01", "svd trainer: orthogonality penalty";
    "lambda_s" => |_| "0.001", "svd trainer: sparsity penalty";
    "seeds" => |_| "0", "comma-separated seeds; --seed replaces this list";
    "mnist_dir" => |_| "data/mnist", "directory holding the four IDX files";
    "mnist_normalization" => |_| "unit_interval", "pixels divided by 255 (the only supported value)";
    "train_subset" => |_| "0", "use only the first N training images; 0 means all";
    "mixture_train" => |_| "1000", "mixture training samples";
    "mixture_test" => |_| "1000", "mixture test samples";
    "mixture_variance" => |_| "0.05", "shared variance of the mixture components";
    "data_seed" => |_| "0", "seed for synthesized data, independent of training seeds";
    "checkpoint" => |_| "", "analyze: checkpoint to load";
    "prune_fractions" => |_| "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "analyze prune: fractions removed";
    "prune_draws" => |_| "10", "analyze prune: random subsets averaged per fraction";
    "prune_layers" => |_| "all", "analyze prune: comma-separated layer indices or all";
    "prune_seed" => |_| "0", "analyze prune: seed for random removal";
    "overlap_threshold" => |_| "0.8", "analyze overlap: explained-variance threshold per class";
    "overlap_include_input" => |_| "false", "analyze overlap: also measure the raw input layer";
    "dispersion_side" => |_| "downstream", "analyze dispersion: downstream | upstream patterns";
    "stages_samples" => |_| "0", "analyze stages: first N test samples; 0 means all";
    "ts_d" => |_| "100", "theory: input dimensions, comma-separated";
    "ts_alpha" => |_| "1", "theory: mode loads, comma-separated; p = max(1, round(alpha ln d))";
    "ts_k" => |_| "2", "theory: teacher hidden units";
    "ts_m" => |_| "2", "theory: student hidden units";
    "ts_eta" => |_| "1", "theory: online learning rate";
    "ts_horizon" => |_| "100", "theory: length in tau = steps / d";
    "ts_dt" => |_| "0.01", "theory: Euler step of the ODE";
    "ts_record_every" => |_| "1", "theory: recording interval in tau";
    "ts_init_seed" => |_| "10", "theory: seed of the shared teacher and initial student";
    "ts_threshold" => |_| "0.01", "theory: error level for the time-to-threshold summary";
    "leastp_widths" => |_| "50,100,200", "leastp: hidden widths N of input-N-N-output nets";
    "leastp_grid" => |_| "5,10,15,20,25,30,35,40,45,50", "leastp: ascending mode counts";
    "leastp_epsilon" => |_| "0.002", "leastp: accuracy tolerance below the dense reference";
    "leastp_runs" => |_| "1", "leastp: seeds per cell";
}

/// One line per key with its default, for `--help`.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (defaults for task=mnist; mixture differs where noted):\n");
    for k in KEYS {
        let d = (k.default)(Task::Mnist);
        let m = (k.default)(Task::Mixture);
        let extra = if d != m { format!(" (mixture: {m})") } else { String::new() };
        let _ = writeln!(s, "  {:<22} {:<12} {}{}", k.key, if d.is_empty() { "\"\"" } else { d }, k.help, extra);
    }
    s
}

/// Raw key-value pairs before defaults are applied.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key = value, got `{line}`", i + 1)))?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.iter().any(|k| k.key == key) {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{kv}`")))?;
        self.set(k.trim(), v.trim())
    }

    fn get(&self, key: &str, task: Task) -> String {
        self.values.get(key).cloned().unwrap_or_else(|| {
            let spec = KEYS.iter().find(|k| k.key == key).expect("declared key");
            (spec.default)(task).to_string()
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryConfig {
    pub d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub k: usize,
    pub m: usize,
    pub eta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: f64,
    pub init_seed: u64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub run_id: String,
    pub trainer: Trainer,
    pub widths: Vec<usize>,
    pub modes: Vec<usize>,
    pub tying: Tying,
    pub train: TrainConfig,
    pub lambda_o: f64,
    pub lambda_s: f64,
    pub seeds: Vec<u64>,
    pub mnist_dir: PathBuf,
    pub train_subset: usize,
    pub mixture_train: usize,
    pub mixture_test: usize,
    pub mixture_variance: f64,
    pub data_seed: u64,
    pub checkpoint: Option<PathBuf>,
    pub prune_fractions: Vec<f64>,
    pub prune_draws: usize,
    pub prune_layers: Option<Vec<usize>>,
    pub prune_seed: u64,
    pub overlap_threshold: f64,
    pub overlap_include_input: bool,
    pub dispersion_upstream: bool,
    pub stages_samples: usize,
    pub theory: TheoryConfig,
    pub leastp_widths: Vec<usize>,
    pub leastp_grid: Vec<usize>,
    pub leastp_epsilon: f64,
    pub leastp_runs: usize,
    /// Resolved `key = value` lines in declaration order.
    echo: String,
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Usage(format!("config key `{key}`: {why}, got `{value}`"))
}

fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| bad(key, v, "not a valid value"))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, _> = v.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::parse).collect();
    let items = items.map_err(|_| bad(key, v, "not a comma-separated list"))?;
    if items.is_empty() {
        return Err(bad(key, v, "list must not be empty"));
    }
    Ok(items)
}

fn positive(key: &str, v: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "must be a finite positive number"))
    }
}

fn non_negative(key: &str, v: &str, x: f64) -> Result<f64, CliError> {
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "must be a finite non-negative number"))
    }
}

impl ExperimentConfig {
    /// Applies defaults and checks every key. `seeds` from the command
    /// line replace the configured list.
    pub fn resolve(raw: &RawConfig, cli_seeds: &[u64]) -> Result<Self, CliError> {
        let task_raw = raw.get("task", Task::Mnist);
        let task = match task_raw.as_str() {
            "mnist" => Task::Mnist,
            "mixture" => Task::Mixture,
            "teacher_student" => Task::TeacherStudent,
            _ => return Err(bad("task", &task_raw, "expected mnist, mixture or teacher_student")),
        };
        let mut resolved: Vec<(&'static str, String)> = KEYS.iter().map(|k| (k.key, raw.get(k.key, task))).collect();
        if !cli_seeds.is_empty() {
            let s: Vec<String> = cli_seeds.iter().map(u64::to_string).collect();
            resolved.iter_mut().find(|(k, _)| *k == "seeds").expect("seeds key").1 = s.join(",");
        }
        let trainer_raw = &resolved.iter().find(|(k, _)| *k == "trainer").expect("key").1;
        let trainer = match trainer_raw.as_str() {
            "mdl" => Trainer::Mdl,
            "bp" => Trainer::Bp,
            "svd" => Trainer::Svd,
            "lrd" => Trainer::Lrd,
            _ => return Err(bad("trainer", trainer_raw, "expected mdl, bp, svd or lrd")),
        };
        if resolved[1].1.is_empty() {
            resolved[1].1 = match task {
                Task::TeacherStudent => "teacher_student".to_string(),
                _ => format!("{task_raw}-{}", trainer.name()),
            };
        }
        let v = |key: &str| -> &str { &resolved.iter().find(|(k, _)| *k == key).expect("declared key").1 };

        let run_id = v("run_id").to_string();
        if run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
            return Err(bad("run_id", &run_id, "must be a plain directory name"));
        }
        let widths: Vec<usize> = list("widths", v("widths"))?;
        if widths.len() < 2 || widths.contains(&0) {
            return Err(bad("widths", v("widths"), "need at least two positive widths"));
        }
        let mut modes: Vec<usize> = list("modes", v("modes"))?;
        if modes.len() == 1 {
            modes = vec![modes[0]; widths.len() - 1];
        }
        if modes.len() != widths.len() - 1 || modes.contains(&0) {
            return Err(bad("modes", v("modes"), "need one positive count per layer"));
        }
        let tying = match v("tying") {
            "1l2p" => Tying::OneLayerTwoPatterns,
            "1l1p" => Tying::OneLayerOnePattern,
            other => return Err(bad("tying", other, "expected 1l2p or 1l1p")),
        };
        let seeds: Vec<u64> = list("seeds", v("seeds"))?;
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(bad("seeds", v("seeds"), "seeds must be distinct"));
        }
        let train = TrainConfig {
            learning_rate: positive("learning_rate", v("learning_rate"), scalar("learning_rate", v("learning_rate"))?)?,
            batch_size: scalar("batch_size", v("batch_size"))?,
            epochs: scalar("epochs", v("epochs"))?,
            l2: non_negative("l2", v("l2"), scalar("l2", v("l2"))?)?,
            seed: seeds[0],
        };
        if train.batch_size == 0 {
            return Err(bad("batch_size", v("batch_size"), "must be at least 1"));
        }
        if v("mnist_normalization") != "unit_interval" {
            return Err(bad("mnist_normalization", v("mnist_normalization"), "only unit_interval is supported"));
        }
        let checkpoint = Some(v("checkpoint")).filter(|s| !s.is_empty()).map(PathBuf::from);
        let prune_fractions: Vec<f64> = list("prune_fractions", v("prune_fractions"))?;
        if prune_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(bad("prune_fractions", v("prune_fractions"), "fractions must lie in [0, 1]"));
        }
        let prune_layers = match v("prune_layers") {
            "all" => None,
            s => Some(list("prune_layers", s)?),
        };
        let dispersion_upstream = match v("dispersion_side") {
            "downstream" => false,
            "upstream" => true,
            other => return Err(bad("dispersion_side", other, "expected downstream or upstream")),
        };
        let overlap_threshold = scalar("overlap_threshold", v("overlap_threshold"))?;
        if !(overlap_threshold > 0.0 && overlap_threshold < 1.0) {
            return Err(bad("overlap_threshold", v("overlap_threshold"), "must lie in (0, 1)"));
        }
        let theory = TheoryConfig {
            d: list("ts_d", v("ts_d"))?,
            alpha: list("ts_alpha", v("ts_alpha"))?,
            k: scalar("ts_k", v("ts_k"))?,
            m: scalar("ts_m", v("ts_m"))?,
            eta: non_negative("ts_eta", v("ts_eta"), scalar("ts_eta", v("ts_eta"))?)?,
            horizon: non_negative("ts_horizon", v("ts_horizon"), scalar("ts_horizon", v("ts_horizon"))?)?,
            dt: positive("ts_dt", v("ts_dt"), scalar("ts_dt", v("ts_dt"))?)?,
            record_every: positive("ts_record_every", v("ts_record_every"), scalar("ts_record_every", v("ts_record_every"))?)?,
            init_seed: scalar("ts_init_seed", v("ts_init_seed"))?,
            threshold: positive("ts_threshold", v("ts_threshold"), scalar("ts_threshold", v("ts_threshold"))?)?,
        };
        if theory.d.iter().any(|&d| d < 2) {
            return Err(bad("ts_d", v("ts_d"), "dimensions must be at least 2"));
        }
        if theory.alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(bad("ts_alpha", v("ts_alpha"), "mode loads must be positive"));
        }
        if theory.k == 0 || theory.m == 0 {
            return Err(bad("ts_k/ts_m", &format!("{}/{}", theory.k, theory.m), "need at least one hidden unit"));
        }
        let leastp_grid: Vec<usize> = list("leastp_grid", v("leastp_grid"))?;
        if leastp_grid.windows(2).any(|w| w[0] >= w[1]) || leastp_grid.contains(&0) {
            return Err(bad("leastp_grid", v("leastp_grid"), "must be strictly ascending positive counts"));
        }

        let mut echo = String::new();
        for (k, val) in &resolved {
            let _ = writeln!(echo, "{k} = {val}");
        }
        Ok(ExperimentConfig {
            task,
            run_id,
            trainer,
            widths,
            modes,
            tying,
            train,
            lambda_o: non_negative("lambda_o", v("lambda_o"), scalar("lambda_o", v("lambda_o"))?)?,
            lambda_s: non_negative("lambda_s", v("lambda_s"), scalar("lambda_s", v("lambda_s"))?)?,
            seeds,
            mnist_dir: PathBuf::from(v("mnist_dir")),
            train_subset: scalar("train_subset", v("train_subset"))?,
            mixture_train: scalar("mixture_train", v("mixture_train"))?,
            mixture_test: scalar("mixture_test", v("mixture_test"))?,
            mixture_variance: positive("mixture_variance", v("mixture_variance"), scalar("mixture_variance", v("mixture_variance"))?)?,
            data_seed: scalar("data_seed", v("data_seed"))?,
            checkpoint,
            prune_fractions,
            prune_draws: scalar("prune_draws", v("prune_draws"))?,
            prune_layers,
            prune_seed: scalar("prune_seed", v("prune_seed"))?,
            overlap_threshold,
            overlap_include_input: scalar("overlap_include_input", v("overlap_include_input"))?,
            dispersion_upstream,
            stages_samples: scalar("stages_samples", v("stages_samples"))?,
            theory,
            leastp_widths: list("leastp_widths", v("leastp_widths"))?,
            leastp_grid,
            leastp_epsilon: non_negative("leastp_epsilon", v("leastp_epsilon"), scalar("leastp_epsilon", v("leastp_epsilon"))?)?,
            leastp_runs: scalar("leastp_runs", v("leastp_runs"))?,
            echo,
        })
    }

    pub fn echo(&self) -> &str {
        &self.echo
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }
}
