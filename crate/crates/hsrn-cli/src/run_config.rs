//! `key = value` run-configuration files for `hsrn train`.
//!
//! One assignment per line; `#` starts a comment and blank lines are
//! ignored. Unknown and duplicate keys are rejected so typos cannot silently
//! fall back to defaults; every optional key that *is* defaulted produces a
//! notice so the effective configuration is always visible in the log.
//!
//! ```text
//! # minimal training run
//! dataset_dir = crops/
//! model_out   = out/model.hsrn
//! max_iters   = 2000
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use hsrn::network::NetworkArch;
use hsrn::training::{LossKind, TrainingConfig};

use crate::{CliError, CliResult};

/// How `hsrn train` initializes parameters before the first iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// Seeded random initialization (the normal case).
    Random,
    /// Identity network with a zero residual; with `max_iters = 0` this
    /// writes a model that reproduces its bicubic input exactly, useful as
    /// an evaluation baseline.
    ZeroResidual,
}

/// Fully resolved training-run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Directory of training images (one center-cropped sample per file).
    pub dataset_dir: PathBuf,
    /// Where the final model is written.
    pub model_out: PathBuf,
    /// Per-iteration loss log (CSV: iteration, loss, elapsed_ms).
    pub loss_csv: PathBuf,
    /// Checkpoint directory; required when `checkpoint_every > 0`.
    pub checkpoint_dir: Option<PathBuf>,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
    pub arch: NetworkArch,
    /// Upscale factor the samples are built for.
    pub upscale: usize,
    pub training: TrainingConfig,
    pub init: InitKind,
    /// Tile overlap carried into the model's metadata consumers; unused by
    /// training itself but accepted here so one file can describe a run.
    pub tile_overlap: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "dataset_dir",
    "model_out",
    "loss_csv",
    "checkpoint_dir",
    "checkpoint_every",
    "layers",
    "kernels_per_layer",
    "smoothing_half_width",
    "train_height",
    "train_width",
    "upscale",
    "loss",
    "beta",
    "theta",
    "gamma",
    "batch_size",
    "max_iters",
    "seed",
    "tie_symmetric_weights",
    "init",
    "tile_overlap",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| {
        CliError::Usage(format!("config line {line}: {key} = {value:?}: {e}"))
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> CliResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::Usage(format!(
            "config line {line}: {key} must be true or false, got {other:?}"
        ))),
    }
}

/// Parses a config file. Returns the resolved config plus one notice per
/// defaulted key, suitable for logging.
pub fn parse_config(path: &Path) -> CliResult<(RunConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// [`parse_config`] on in-memory text (exposed for tests).
pub fn parse_config_str(text: &str) -> CliResult<(RunConfig, Vec<String>)> {
    let mut seen: HashMap<String, (String, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {line_no}: expected key = value, got {raw:?}"
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {line_no}: unknown key {key:?}")));
        }
        if let Some((_, first)) = seen.get(&key) {
            return Err(CliError::Usage(format!(
                "config line {line_no}: duplicate key {key:?} (first set on line {first})"
            )));
        }
        seen.insert(key, (value, line_no));
    }

    let mut notices = Vec::new();
    let mut take = |key: &str| seen.remove(key);

    let Some((dataset_dir, _)) = take("dataset_dir") else {
        return Err(CliError::Usage("config: required key dataset_dir is missing".into()));
    };
    let Some((model_out, _)) = take("model_out") else {
        return Err(CliError::Usage("config: required key model_out is missing".into()));
    };
    let model_out = PathBuf::from(model_out);

    // Every default is surfaced as a notice so runs are self-describing.
    macro_rules! defaulted {
        ($key:literal, $default:expr, $parse:expr) => {
            match take($key) {
                Some((value, line)) => $parse(&value, line)?,
                None => {
                    let d = $default;
                    notices.push(format!("config: {} defaulted to {}", $key, d));
                    d
                }
            }
        };
    }

    let loss_csv = match take("loss_csv") {
        Some((v, _)) => PathBuf::from(v),
        None => {
            let mut p = model_out.clone().into_os_string();
            p.push(".loss.csv");
            let p = PathBuf::from(p);
            notices.push(format!("config: loss_csv defaulted to {}", p.display()));
            p
        }
    };
    let checkpoint_dir = take("checkpoint_dir").map(|(v, _)| PathBuf::from(v));
    let checkpoint_every: usize =
        defaulted!("checkpoint_every", 0usize, |v, l| parse_num("checkpoint_every", v, l));
    let layers: usize = defaulted!("layers", 6usize, |v, l| parse_num("layers", v, l));
    let kernels_per_layer: usize =
        defaulted!("kernels_per_layer", 5usize, |v, l| parse_num("kernels_per_layer", v, l));
    let half_width: usize =
        defaulted!("smoothing_half_width", 5usize, |v, l| parse_num("smoothing_half_width", v, l));
    let train_height: usize =
        defaulted!("train_height", 96usize, |v, l| parse_num("train_height", v, l));
    let train_width: usize =
        defaulted!("train_width", 96usize, |v, l| parse_num("train_width", v, l));
    let upscale: usize = defaulted!("upscale", 2usize, |v, l| parse_num("upscale", v, l));
    let loss: LossKind = match take("loss") {
        Some((v, l)) => v
            .parse()
            .map_err(|e| CliError::Usage(format!("config line {l}: {e}")))?,
        None => {
            notices.push("config: loss defaulted to l2".into());
            LossKind::L2
        }
    };
    let beta: f64 = defaulted!("beta", 0.01f64, |v, l| parse_num("beta", v, l));
    let theta: f64 = defaulted!("theta", 1.0e3f64, |v, l| parse_num("theta", v, l));
    let gamma: f64 = defaulted!("gamma", 1.0e-5f64, |v, l| parse_num("gamma", v, l));
    let batch_size: usize = defaulted!("batch_size", 4usize, |v, l| parse_num("batch_size", v, l));
    let max_iters: usize = defaulted!("max_iters", 1000usize, |v, l| parse_num("max_iters", v, l));
    let seed: u64 = defaulted!("seed", 0u64, |v, l| parse_num("seed", v, l));
    let tie: bool =
        defaulted!("tie_symmetric_weights", false, |v, l| parse_bool("tie_symmetric_weights", v, l));
    let init = match take("init") {
        Some((v, l)) => match v.as_str() {
            "random" => InitKind::Random,
            "zero-residual" => InitKind::ZeroResidual,
            other => {
                return Err(CliError::Usage(format!(
                    "config line {l}: init must be random or zero-residual, got {other:?}"
                )))
            }
        },
        None => {
            notices.push("config: init defaulted to random".into());
            InitKind::Random
        }
    };
    let tile_overlap: usize =
        defaulted!("tile_overlap", 16usize, |v, l| parse_num("tile_overlap", v, l));

    let arch = NetworkArch {
        layers,
        kernels_per_layer,
        half_width,
        height: train_height,
        width: train_width,
        tie_symmetric_weights: tie,
    };
    arch.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    let training = TrainingConfig { loss, beta, theta, gamma, batch_size, max_iters, seed };
    training.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if upscale < 2 {
        return Err(CliError::Usage(format!("config: upscale must be >= 2, got {upscale}")));
    }
    if train_height % upscale != 0 || train_width % upscale != 0 {
        return Err(CliError::Usage(format!(
            "config: training size {train_height}x{train_width} must be a multiple of upscale {upscale}"
        )));
    }
    if checkpoint_every > 0 && checkpoint_dir.is_none() {
        return Err(CliError::Usage(
            "config: checkpoint_every > 0 requires checkpoint_dir".into(),
        ));
    }

    Ok((
        RunConfig {
            dataset_dir: PathBuf::from(dataset_dir),
            model_out,
            loss_csv,
            checkpoint_dir,
            checkpoint_every,
            arch,
            upscale,
            training,
            init,
            tile_overlap,
        },
        notices,
    ))
}
