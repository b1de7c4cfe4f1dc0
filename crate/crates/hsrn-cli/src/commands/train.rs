//! `hsrn train --config <file>`

use std::path::{Path, PathBuf};
use std::time::Instant;

use hsrn::imaging;
use hsrn::network::NetworkParams;
use hsrn::training::{self, TrainingSample};

use crate::model_file::{self, Model};
use crate::run_config::{parse_config, InitKind, RunConfig};
use crate::{CliError, CliResult};

pub fn run(config_path: &Path) -> CliResult<()> {
    let (cfg, notices) = parse_config(config_path)?;
    for notice in &notices {
        eprintln!("note: {notice}");
    }
    let samples = collect_samples(&cfg)?;
    eprintln!(
        "training on {} sample(s): {}x{} plane, x{} upscale, {} layer(s) of {} kernel(s)",
        samples.len(),
        cfg.arch.height,
        cfg.arch.width,
        cfg.upscale,
        cfg.arch.layers,
        cfg.arch.kernels_per_layer
    );

    if let Some(parent) = cfg.model_out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if let Some(parent) = cfg.loss_csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let initial = match cfg.init {
        InitKind::Random => NetworkParams::init(&cfg.arch, cfg.training.seed)?,
        InitKind::ZeroResidual => NetworkParams::zero_residual(&cfg.arch)?,
    };

    let mut loss_writer = csv::Writer::from_path(&cfg.loss_csv)?;
    loss_writer.write_record(["iteration", "loss", "elapsed_ms"])?;

    let progress_every = (cfg.training.max_iters / 20).max(1);
    let started = Instant::now();
    let mut last_checkpoint: Option<PathBuf> = None;
    let cfg_ref = &cfg;
    let last_checkpoint_ref = &mut last_checkpoint;
    let writer_ref = &mut loss_writer;

    let outcome = training::train_from(initial, &samples, &cfg.training, move |event| {
        writer_ref
            .write_record(&[
                event.iteration.to_string(),
                format!("{}", event.loss),
                format!("{:.3}", event.elapsed_ms),
            ])
            .map_err(|e| hsrn::Error::Io(std::io::Error::other(e)))?;
        if event.iteration % progress_every == 0 {
            eprintln!(
                "iter {}/{} loss {:.6e}",
                event.iteration, cfg_ref.training.max_iters, event.loss
            );
        }
        // `event.iteration` counts completed SGD steps; skip the untrained
        // iteration-0 snapshot.
        if let Some(dir) = &cfg_ref.checkpoint_dir {
            if cfg_ref.checkpoint_every > 0
                && event.iteration > 0
                && event.iteration % cfg_ref.checkpoint_every == 0
            {
                let path = dir.join(format!("checkpoint_{:06}.hsrn", event.iteration));
                let model = Model {
                    params: event.params.clone(),
                    upscale: cfg_ref.upscale,
                    loss: cfg_ref.training.loss,
                };
                model_file::save(&path, &model)
                    .map_err(|e| hsrn::Error::Io(std::io::Error::other(e.to_string())))?;
                *last_checkpoint_ref = Some(path);
            }
        }
        Ok(())
    });

    match outcome {
        Ok(params) => {
            loss_writer.flush()?;
            let model = Model { params, upscale: cfg.upscale, loss: cfg.training.loss };
            model_file::save(&cfg.model_out, &model)?;
            println!(
                "trained {} iteration(s) in {:.1}s; model written to {}",
                cfg.training.max_iters,
                started.elapsed().as_secs_f64(),
                cfg.model_out.display()
            );
            println!("loss log written to {}", cfg.loss_csv.display());
            Ok(())
        }
        Err(err @ hsrn::Error::Divergence { .. }) => {
            loss_writer.flush()?;
            eprintln!("error: {err}");
            match &last_checkpoint {
                Some(p) => eprintln!("last checkpoint retained at {}", p.display()),
                None => eprintln!("no checkpoint was written before divergence"),
            }
            Err(CliError::from(err))
        }
        Err(err) => {
            loss_writer.flush()?;
            Err(CliError::from(err))
        }
    }
}

/// Loads every usable image in the dataset directory and turns each one into
/// a single centered training pair. Files that cannot be decoded or are too
/// small for the configured plane are skipped with a warning.
fn collect_samples(cfg: &RunConfig) -> CliResult<Vec<TrainingSample>> {
    let files = super::list_images(&cfg.dataset_dir)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no image files found in {}",
            cfg.dataset_dir.display()
        )));
    }
    let mut samples = Vec::new();
    for path in &files {
        let plane = match super::load_plane(path) {
            Ok((plane, _, _)) => plane,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                continue;
            }
        };
        match imaging::make_pair(&plane, cfg.upscale, cfg.arch.height, cfg.arch.width) {
            Ok(pair) => samples.push(pair),
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    if samples.is_empty() {
        return Err(CliError::Usage(format!(
            "none of the {} image file(s) in {} could be used for training",
            files.len(),
            cfg.dataset_dir.display()
        )));
    }
    Ok(samples)
}
