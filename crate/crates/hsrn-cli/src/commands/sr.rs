//! `hsrn sr --model <file> --input <image> --output <image>`

use std::path::PathBuf;
use std::time::Instant;

use hsrn::imaging::{self, SourceColor};

use crate::model_file;
use crate::{CliError, CliResult};

pub struct SrOpts {
    pub model: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub tile_overlap: usize,
}

pub fn run(opts: &SrOpts) -> CliResult<()> {
    let model = model_file::load(&opts.model)?;
    let (plane, img, source) = super::load_plane(&opts.input)
        .map_err(|e| CliError::Usage(format!("input {}: {e}", opts.input.display())))?;
    let s = model.upscale;
    let (rows, cols) = plane.dims();
    let (out_rows, out_cols) = (rows * s, cols * s);
    let (tile_rows, tile_cols) = (model.params.arch.height, model.params.arch.width);

    let prep_start = Instant::now();
    let up_y = imaging::bicubic_resize(&plane, out_rows, out_cols)?;
    let chroma = match source {
        SourceColor::Grayscale => None,
        SourceColor::Rgb => {
            let (cb, cr) = imaging::rgb_to_cbcr(&img);
            Some((
                imaging::bicubic_resize(&cb, out_rows, out_cols)?,
                imaging::bicubic_resize(&cr, out_rows, out_cols)?,
            ))
        }
    };
    let prep_ms = prep_start.elapsed().as_secs_f64() * 1e3;

    let (sr_y, times) =
        imaging::super_resolve_tiled_timed(&up_y, &model.params, opts.tile_overlap)?;

    let write_start = Instant::now();
    match chroma {
        None => imaging::save_gray(&opts.output, &sr_y)?,
        Some((cb, cr)) => {
            let rgb = imaging::ycbcr_to_rgb(&sr_y, &cb, &cr)?;
            imaging::save_rgb(&opts.output, &rgb)?;
        }
    }
    let write_ms = write_start.elapsed().as_secs_f64() * 1e3;

    println!("input={}x{} output={}x{} scale={s}", rows, cols, out_rows, out_cols);
    println!("tile={}x{} overlap={}", tile_rows, tile_cols, opts.tile_overlap);
    println!("prep_ms={prep_ms:.3}");
    println!("transform_ms={:.3}", times.transform_ms);
    println!("network_ms={:.3}", times.network_ms);
    println!("inverse_ms={:.3}", times.inverse_ms);
    println!("write_ms={write_ms:.3}");
    println!("output={}", opts.output.display());
    Ok(())
}
