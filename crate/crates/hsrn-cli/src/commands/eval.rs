//! `hsrn eval --model <file> --dataset <dir>`

use std::path::{Path, PathBuf};
use std::time::Instant;

use hsrn::imaging;
use hsrn::Grid;

use crate::model_file::{self, Model};
use crate::{CliError, CliResult};

pub struct EvalOpts {
    pub model: PathBuf,
    pub dataset: PathBuf,
    pub scale: Option<usize>,
    pub csv: Option<PathBuf>,
    pub tile_overlap: usize,
}

struct RowMetrics {
    psnr_bicubic: f64,
    psnr_model: f64,
    ssim_bicubic: f64,
    ssim_model: f64,
    millis: f64,
}

pub fn run(opts: &EvalOpts) -> CliResult<()> {
    let model = model_file::load(&opts.model)?;
    if let Some(s) = opts.scale {
        if s != model.upscale {
            return Err(CliError::Usage(format!(
                "requested scale x{s} but the model was trained for x{}",
                model.upscale
            )));
        }
    }
    let files = super::list_images(&opts.dataset)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no image files found in {}",
            opts.dataset.display()
        )));
    }

    let mut rows: Vec<(String, Option<RowMetrics>)> = Vec::new();
    for path in &files {
        let name = super::display_name(path);
        match eval_one(path, &model, opts.tile_overlap) {
            Ok(metrics) => rows.push((name, Some(metrics))),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                rows.push((name, None));
            }
        }
    }
    let evaluated: Vec<&RowMetrics> = rows.iter().filter_map(|(_, m)| m.as_ref()).collect();
    if evaluated.is_empty() {
        return Err(CliError::Usage(format!(
            "all {} image(s) in {} were skipped; nothing to evaluate",
            rows.len(),
            opts.dataset.display()
        )));
    }

    let n = evaluated.len() as f64;
    let mean = RowMetrics {
        psnr_bicubic: evaluated.iter().map(|m| m.psnr_bicubic).sum::<f64>() / n,
        psnr_model: evaluated.iter().map(|m| m.psnr_model).sum::<f64>() / n,
        ssim_bicubic: evaluated.iter().map(|m| m.ssim_bicubic).sum::<f64>() / n,
        ssim_model: evaluated.iter().map(|m| m.ssim_model).sum::<f64>() / n,
        millis: evaluated.iter().map(|m| m.millis).sum::<f64>() / n,
    };

    let mut writer: csv::Writer<Box<dyn std::io::Write>> = match &opts.csv {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            csv::Writer::from_writer(Box::new(std::fs::File::create(path)?))
        }
        None => csv::Writer::from_writer(Box::new(std::io::stdout())),
    };
    writer.write_record(["name", "psnr_bicubic", "psnr_model", "ssim_bicubic", "ssim_model", "ms"])?;
    for (name, metrics) in &rows {
        match metrics {
            Some(m) => writer.write_record(&[
                name.clone(),
                format!("{}", m.psnr_bicubic),
                format!("{}", m.psnr_model),
                format!("{}", m.ssim_bicubic),
                format!("{}", m.ssim_model),
                format!("{:.3}", m.millis),
            ])?,
            None => writer.write_record(&[
                name.clone(),
                "skip".into(),
                "skip".into(),
                "skip".into(),
                "skip".into(),
                "skip".into(),
            ])?,
        }
    }
    writer.write_record(&[
        "mean".to_string(),
        format!("{}", mean.psnr_bicubic),
        format!("{}", mean.psnr_model),
        format!("{}", mean.ssim_bicubic),
        format!("{}", mean.ssim_model),
        format!("{:.3}", mean.millis),
    ])?;
    writer.flush()?;

    eprintln!(
        "evaluated {} image(s), skipped {}; bicubic {:.3} dB / {:.4}, model {:.3} dB / {:.4}",
        evaluated.len(),
        rows.len() - evaluated.len(),
        mean.psnr_bicubic,
        mean.ssim_bicubic,
        mean.psnr_model,
        mean.ssim_model,
    );
    if let Some(path) = &opts.csv {
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

/// Evaluates a single image: modcrop the reference plane, synthesize the
/// low-resolution input, and compare the bicubic baseline against the model
/// reconstruction. Metrics are computed on planes clamped to [0, 1].
fn eval_one(path: &Path, model: &Model, tile_overlap: usize) -> CliResult<RowMetrics> {
    let (plane, _, _) = super::load_plane(path)?;
    let s = model.upscale;
    let hr = imaging::modcrop(&plane, s)?;
    let (rows, cols) = hr.dims();
    let lr = imaging::bicubic_resize(&hr, rows / s, cols / s)?;
    let up = imaging::bicubic_resize(&lr, rows, cols)?;

    let start = Instant::now();
    let sr = imaging::super_resolve_tiled(&up, &model.params, tile_overlap)?;
    let millis = start.elapsed().as_secs_f64() * 1e3;

    let up_clamped: Grid = up.map(|v| v.clamp(0.0, 1.0));
    Ok(RowMetrics {
        psnr_bicubic: imaging::psnr(&up_clamped, &hr, 1.0)?,
        psnr_model: imaging::psnr(&sr, &hr, 1.0)?,
        ssim_bicubic: imaging::ssim(&up_clamped, &hr)?,
        ssim_model: imaging::ssim(&sr, &hr)?,
        millis,
    })
}
