//! `hsrn inspect --model <file> --out-dir <dir>`
//!
//! Dumps the learned smoothing kernels as images and raw CSV grids, and —
//! when given a probe image — the per-layer frequency-domain activations.

use std::path::{Path, PathBuf};

use hsrn::imaging;
use hsrn::network;
use hsrn::Grid;

use crate::model_file;
use crate::{CliError, CliResult};

pub struct InspectOpts {
    pub model: PathBuf,
    pub out_dir: PathBuf,
    pub image: Option<PathBuf>,
    pub layer: Option<usize>,
}

/// Nearest-neighbour magnification for kernel thumbnails.
const KERNEL_ZOOM: usize = 16;

pub fn run(opts: &InspectOpts) -> CliResult<()> {
    let model = model_file::load(&opts.model)?;
    let arch = &model.params.arch;
    if let Some(layer) = opts.layer {
        if layer >= arch.layers {
            return Err(CliError::Usage(format!(
                "layer {layer} out of range: the model has {} layer(s)",
                arch.layers
            )));
        }
    }
    std::fs::create_dir_all(&opts.out_dir)?;
    let layers: Vec<usize> = match opts.layer {
        Some(l) => vec![l],
        None => (0..arch.layers).collect(),
    };

    println!(
        "model: {} layer(s) x {} kernel(s), {}x{} plane, x{} upscale, {} loss",
        arch.layers, arch.kernels_per_layer, arch.height, arch.width, model.upscale, model.loss
    );
    println!("final weight mean |w| = {:.6}", mean_abs(&model.params.final_weight));
    for &l in &layers {
        println!("layer {l}: mix weight = {}", model.params.layer_mix[l]);
    }

    let mut written = 0usize;
    for &l in &layers {
        for k in 0..arch.kernels_per_layer {
            let kernel = &model.params.kernels[l * arch.kernels_per_layer + k];
            let png = opts.out_dir.join(format!("kernel_l{l}_b{k}.png"));
            imaging::save_gray(&png, &zoom(&signed_to_unit(kernel), KERNEL_ZOOM))?;
            let csv_path = opts.out_dir.join(format!("kernel_l{l}_b{k}.csv"));
            write_grid_csv(&csv_path, kernel)?;
            written += 2;
        }
    }

    if let Some(image_path) = &opts.image {
        let (plane, _, _) = super::load_plane(image_path)
            .map_err(|e| CliError::Usage(format!("probe image {}: {e}", image_path.display())))?;
        // The network operates on fixed-size planes; resize the probe to fit.
        let resized = imaging::bicubic_resize(&plane, arch.height, arch.width)?;
        let spectrum = hsrn::hartley::dht2(&resized)?;
        let trace = network::forward(&spectrum, &model.params)?;
        for &l in &layers {
            let sum = &trace.layer_sums[l];
            println!("layer {l}: off-dc energy fraction = {:.6}", off_dc_fraction(sum));
            let png = opts.out_dir.join(format!("feature_l{l}.png"));
            imaging::save_gray(&png, &log_magnitude_centered(sum))?;
            let csv_path = opts.out_dir.join(format!("feature_l{l}.csv"));
            write_grid_csv(&csv_path, sum)?;
            written += 2;
        }
    }

    println!("wrote {written} file(s) to {}", opts.out_dir.display());
    Ok(())
}

/// Writes a grid as CSV with shortest round-trip float formatting, so reading
/// the file back reproduces the exact stored values.
pub fn write_grid_csv(path: &Path, grid: &Grid) -> CliResult<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for r in 0..grid.rows() {
        let record: Vec<String> = grid.row(r).iter().map(|v| format!("{v}")).collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a grid written by [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> CliResult<Grid> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut data = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        if rows == 0 {
            cols = record.len();
        } else if record.len() != cols {
            return Err(CliError::Other(format!(
                "{}: ragged csv row {rows}",
                path.display()
            )));
        }
        for field in record.iter() {
            let value: f64 = field
                .parse()
                .map_err(|e| CliError::Other(format!("{}: bad float: {e}", path.display())))?;
            data.push(value);
        }
        rows += 1;
    }
    Grid::from_vec(rows, cols, data).map_err(CliError::from)
}

/// Maps a signed grid into [0, 1] with zero at mid-gray, scaled by the
/// largest magnitude.
fn signed_to_unit(grid: &Grid) -> Grid {
    let peak = grid.max_abs().max(f64::MIN_POSITIVE);
    grid.map(|v| 0.5 + 0.5 * v / peak)
}

/// Nearest-neighbour upscale for small thumbnails.
fn zoom(grid: &Grid, factor: usize) -> Grid {
    Grid::from_fn(grid.rows() * factor, grid.cols() * factor, |r, c| {
        grid[(r / factor, c / factor)]
    })
}

/// Log-magnitude view of a frequency plane with the zero-frequency bin moved
/// to the center, normalized to [0, 1].
fn log_magnitude_centered(map: &Grid) -> Grid {
    let peak = map.max_abs();
    let scale = (1.0 + peak).ln().max(f64::MIN_POSITIVE);
    let (rows, cols) = map.dims();
    Grid::from_fn(rows, cols, |r, c| {
        let src_r = (r + rows - rows / 2) % rows;
        let src_c = (c + cols - cols / 2) % cols;
        (1.0 + map[(src_r, src_c)].abs()).ln() / scale
    })
}

/// Fraction of spectral energy outside the zero-frequency bin.
fn off_dc_fraction(map: &Grid) -> f64 {
    let total = map.sum_sq();
    if total == 0.0 {
        return 0.0;
    }
    let dc = map[(0, 0)];
    1.0 - dc * dc / total
}

fn mean_abs(grid: &Grid) -> f64 {
    if grid.len() == 0 {
        return 0.0;
    }
    grid.as_slice().iter().map(|v| v.abs()).sum::<f64>() / grid.len() as f64
}
