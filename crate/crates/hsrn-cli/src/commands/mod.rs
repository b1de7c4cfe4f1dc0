//! Subcommand implementations.

pub mod bench;
pub mod eval;
pub mod inspect;
pub mod sr;
pub mod train;

use std::path::{Path, PathBuf};

use hsrn::imaging::{self, RgbImage, SourceColor};
use hsrn::Grid;

use crate::{CliError, CliResult};

/// Extensions the tool will try to decode.
const IMAGE_EXTENSIONS: &[&str] = &["png", "pnm", "pgm", "ppm", "pbm"];

/// Image files in `dir`, sorted lexicographically by filename so runs are
/// deterministic. The directory itself must exist.
pub(crate) fn list_images(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read dataset directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    Ok(files)
}

/// Decodes an image and reduces it to the plane the network operates on:
/// grayscale sources pass through unchanged, color sources are converted to
/// studio-swing luma.
pub(crate) fn load_plane(path: &Path) -> CliResult<(Grid, RgbImage, SourceColor)> {
    let (img, source) = imaging::load_image(path)?;
    let plane = match source {
        SourceColor::Grayscale => img.r.clone(),
        SourceColor::Rgb => imaging::rgb_to_y(&img),
    };
    Ok((plane, img, source))
}

/// File stem for report rows.
pub(crate) fn display_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| {
        path.display().to_string()
    })
}
