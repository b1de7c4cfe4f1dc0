//! `hsrn bench --model <file> --sizes 64,128,256`

use std::path::PathBuf;
use std::time::Instant;

use hsrn::imaging::{self, StageTimes};
use hsrn::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model_file;
use crate::{CliError, CliResult};

pub struct BenchOpts {
    pub model: PathBuf,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub csv: Option<PathBuf>,
    pub tile_overlap: usize,
}

struct Measurement {
    stages: StageTimes,
    total_ms: f64,
}

pub fn run(opts: &BenchOpts) -> CliResult<()> {
    let model = model_file::load(&opts.model)?;
    if opts.sizes.is_empty() {
        return Err(CliError::Usage("bench: at least one size is required".into()));
    }
    if opts.sizes.iter().any(|&s| s == 0) {
        return Err(CliError::Usage("bench: sizes must be positive".into()));
    }
    if opts.repeats == 0 {
        return Err(CliError::Usage("bench: repeats must be at least 1".into()));
    }

    let mut writer: csv::Writer<Box<dyn std::io::Write>> = match &opts.csv {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            csv::Writer::from_writer(Box::new(std::fs::File::create(path)?))
        }
        None => csv::Writer::from_writer(Box::new(std::io::stdout())),
    };
    writer.write_record(["size", "stat", "transform_ms", "network_ms", "inverse_ms", "total_ms"])?;

    for &size in &opts.sizes {
        let plane = synthetic_plane(size);
        // One untimed warm-up run so planner caches and allocators settle.
        imaging::super_resolve_tiled(&plane, &model.params, opts.tile_overlap)?;

        let mut runs = Vec::with_capacity(opts.repeats);
        for _ in 0..opts.repeats {
            let start = Instant::now();
            let (_, stages) =
                imaging::super_resolve_tiled_timed(&plane, &model.params, opts.tile_overlap)?;
            let total_ms = start.elapsed().as_secs_f64() * 1e3;
            runs.push(Measurement { stages, total_ms });
        }

        for (stat, pick) in [("mean", false), ("median", true)] {
            let transform = summarize(&runs, pick, |m| m.stages.transform_ms);
            let network = summarize(&runs, pick, |m| m.stages.network_ms);
            let inverse = summarize(&runs, pick, |m| m.stages.inverse_ms);
            let total = summarize(&runs, pick, |m| m.total_ms);
            writer.write_record(&[
                size.to_string(),
                stat.to_string(),
                format!("{transform:.3}"),
                format!("{network:.3}"),
                format!("{inverse:.3}"),
                format!("{total:.3}"),
            ])?;
            if stat == "mean" {
                eprintln!(
                    "{size}x{size}: transform {transform:.2} ms, network {network:.2} ms, \
                     inverse {inverse:.2} ms, total {total:.2} ms (mean of {})",
                    opts.repeats
                );
            }
        }
    }
    writer.flush()?;
    if let Some(path) = &opts.csv {
        eprintln!("benchmark written to {}", path.display());
    }
    Ok(())
}

/// Mean or per-field median over the recorded runs.
fn summarize(runs: &[Measurement], median: bool, field: impl Fn(&Measurement) -> f64) -> f64 {
    let mut values: Vec<f64> = runs.iter().map(field).collect();
    if median {
        values.sort_by(|a, b| a.total_cmp(b));
        let mid = values.len() / 2;
        if values.len() % 2 == 1 {
            values[mid]
        } else {
            0.5 * (values[mid - 1] + values[mid])
        }
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Deterministic synthetic test plane: uniform noise seeded by the size so
/// repeated invocations benchmark identical inputs.
fn synthetic_plane(size: usize) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
    let mut plane = Grid::new(size, size);
    for v in plane.as_mut_slice() {
        *v = rng.random_range(0.0..1.0);
    }
    plane
}
