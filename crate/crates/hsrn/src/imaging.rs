//! Image handling: color conversion, bicubic resampling, quality metrics,
//! and the end-to-end super-resolution drivers.
//!
//! Planes are `f64` grids in `[0, 1]`. Luma follows the BT.601 studio-swing
//! convention (black at 16/255, white at 235/255), which is also what the
//! evaluation metrics run on. Bicubic resampling uses the Keys kernel with
//! `a = -0.5`, edge-clamped taps, normalized weights, and antialias kernel
//! widening on downscale — the convention most SR literature assumes.

use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{Grid, ImagePlane};
use crate::hartley::dht2;
use crate::network::{forward, NetworkParams};
use crate::training::{residual_compose, TrainingSample};

/// Three same-shaped planes in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct RgbImage {
    pub r: Grid,
    pub g: Grid,
    pub b: Grid,
}

impl RgbImage {
    pub fn from_planes(r: Grid, g: Grid, b: Grid) -> Result<RgbImage> {
        r.check_same_dims(&g, "RgbImage")?;
        r.check_same_dims(&b, "RgbImage")?;
        Ok(RgbImage { r, g, b })
    }

    /// Replicates a gray plane into all three channels.
    pub fn splat(plane: &Grid) -> RgbImage {
        RgbImage { r: plane.clone(), g: plane.clone(), b: plane.clone() }
    }

    pub fn rows(&self) -> usize {
        self.r.rows()
    }

    pub fn cols(&self) -> usize {
        self.r.cols()
    }
}

/// Whether a decoded file stored color or a single gray channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceColor {
    Grayscale,
    Rgb,
}

/// Decodes an image file into `[0, 1]` planes, reporting whether the source
/// was grayscale (such files round-trip through the luma path unchanged).
pub fn load_image(path: &Path) -> Result<(RgbImage, SourceColor)> {
    let decoded = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    use image::ColorType::*;
    let source = match decoded.color() {
        L8 | La8 | L16 | La16 => SourceColor::Grayscale,
        _ => SourceColor::Rgb,
    };
    let buf = decoded.to_rgb32f();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let mut r = Grid::new(h, w);
    let mut g = Grid::new(h, w);
    let mut b = Grid::new(h, w);
    for (x, y, px) in buf.enumerate_pixels() {
        let (row, col) = (y as usize, x as usize);
        r[(row, col)] = px.0[0] as f64;
        g[(row, col)] = px.0[1] as f64;
        b[(row, col)] = px.0[2] as f64;
    }
    Ok((RgbImage { r, g, b }, source))
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a gray plane as an 8-bit image; format follows the extension.
pub fn save_gray(path: &Path, plane: &Grid) -> Result<()> {
    plane.check_nonempty("save_gray")?;
    let (rows, cols) = plane.dims();
    let buf = image::GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        image::Luma([to_u8(plane[(y as usize, x as usize)])])
    });
    buf.save(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Writes an RGB image as 8-bit; format follows the extension.
pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    img.r.check_nonempty("save_rgb")?;
    let buf = image::RgbImage::from_fn(img.cols() as u32, img.rows() as u32, |x, y| {
        let (row, col) = (y as usize, x as usize);
        image::Rgb([
            to_u8(img.r[(row, col)]),
            to_u8(img.g[(row, col)]),
            to_u8(img.b[(row, col)]),
        ])
    });
    buf.save(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// BT.601 studio-swing luma: `Y = 16/255 + (65.481 R + 128.553 G + 24.966 B) / 255`.
///
/// Black maps to `16/255`, white to `235/255`.
pub fn rgb_to_y(img: &RgbImage) -> ImagePlane {
    let mut y = Grid::new(img.rows(), img.cols());
    let dst = y.as_mut_slice();
    for (i, ((&r, &g), &b)) in img
        .r
        .as_slice()
        .iter()
        .zip(img.g.as_slice())
        .zip(img.b.as_slice())
        .enumerate()
    {
        dst[i] = (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
    }
    y
}

/// BT.601 studio-swing chroma planes `(Cb, Cr)`.
pub fn rgb_to_cbcr(img: &RgbImage) -> (Grid, Grid) {
    let mut cb = Grid::new(img.rows(), img.cols());
    let mut cr = Grid::new(img.rows(), img.cols());
    let (cbs, crs) = (cb.as_mut_slice(), cr.as_mut_slice());
    for (i, ((&r, &g), &b)) in img
        .r
        .as_slice()
        .iter()
        .zip(img.g.as_slice())
        .zip(img.b.as_slice())
        .enumerate()
    {
        cbs[i] = (128.0 - 37.797 * r - 74.203 * g + 112.0 * b) / 255.0;
        crs[i] = (128.0 + 112.0 * r - 93.786 * g - 18.214 * b) / 255.0;
    }
    (cb, cr)
}

/// Inverse of the studio-swing YCbCr conversion, clamped to `[0, 1]`.
pub fn ycbcr_to_rgb(y: &Grid, cb: &Grid, cr: &Grid) -> Result<RgbImage> {
    y.check_same_dims(cb, "ycbcr_to_rgb")?;
    y.check_same_dims(cr, "ycbcr_to_rgb")?;
    let mut r = Grid::new(y.rows(), y.cols());
    let mut g = Grid::new(y.rows(), y.cols());
    let mut b = Grid::new(y.rows(), y.cols());
    let (rs, gs, bs) = (r.as_mut_slice(), g.as_mut_slice(), b.as_mut_slice());
    for (i, ((&yv, &cbv), &crv)) in
        y.as_slice().iter().zip(cb.as_slice()).zip(cr.as_slice()).enumerate()
    {
        let yy = yv * 255.0 - 16.0;
        let pb = cbv * 255.0 - 128.0;
        let pr = crv * 255.0 - 128.0;
        rs[i] = ((1.164383 * yy + 1.596027 * pr) / 255.0).clamp(0.0, 1.0);
        gs[i] = ((1.164383 * yy - 0.391762 * pb - 0.812968 * pr) / 255.0).clamp(0.0, 1.0);
        bs[i] = ((1.164383 * yy + 2.017232 * pb) / 255.0).clamp(0.0, 1.0);
    }
    Ok(RgbImage { r, g, b })
}

/// Keys bicubic kernel with `a = -0.5`.
fn cubic_kernel(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 1.0 {
        (1.5 * ax - 2.5) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    } else {
        0.0
    }
}

/// Resampling plan for one axis: per output index, the first source tap and
/// the normalized tap weights (a fixed count per plan).
struct AxisPlan {
    width: usize,
    starts: Vec<i64>,
    weights: Vec<f64>,
}

fn axis_plan(in_n: usize, out_n: usize) -> AxisPlan {
    let scale = in_n as f64 / out_n as f64;
    // Widen the kernel by the scale ratio when shrinking so it acts as an
    // antialias filter; identity and upscales keep the 4-tap footprint.
    let kscale = scale.max(1.0);
    let support = 2.0 * kscale;
    let width = (2.0 * support).floor() as usize + 2;
    let mut starts = Vec::with_capacity(out_n);
    let mut weights = Vec::with_capacity(out_n * width);
    for i in 0..out_n {
        let center = (i as f64 + 0.5) * scale - 0.5;
        let left = (center - support).ceil() as i64;
        let mut sum = 0.0;
        let base = weights.len();
        for t in 0..width {
            let w = cubic_kernel(((left + t as i64) as f64 - center) / kscale);
            weights.push(w);
            sum += w;
        }
        for w in &mut weights[base..] {
            *w /= sum;
        }
        starts.push(left);
    }
    AxisPlan { width, starts, weights }
}

/// Bicubic resample to an arbitrary size (Keys `a = -0.5`, edge-clamped,
/// antialiased on downscale, weights normalized per output sample).
pub fn bicubic_resize(src: &Grid, out_rows: usize, out_cols: usize) -> Result<Grid> {
    src.check_nonempty("bicubic_resize")?;
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::invalid("bicubic_resize: output dimensions must be at least 1x1"));
    }
    let (in_rows, in_cols) = src.dims();

    // Vertical pass: out_rows x in_cols.
    let vplan = axis_plan(in_rows, out_rows);
    let mut mid = Grid::new(out_rows, in_cols);
    for i in 0..out_rows {
        let taps = &vplan.weights[i * vplan.width..(i + 1) * vplan.width];
        let left = vplan.starts[i];
        let dst = &mut mid.as_mut_slice()[i * in_cols..(i + 1) * in_cols];
        for (t, &w) in taps.iter().enumerate() {
            let sr = (left + t as i64).clamp(0, in_rows as i64 - 1) as usize;
            let row = src.row(sr);
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += w * s;
            }
        }
    }

    // Horizontal pass: out_rows x out_cols.
    let hplan = axis_plan(in_cols, out_cols);
    let mut out = Grid::new(out_rows, out_cols);
    for i in 0..out_rows {
        let row = mid.row(i);
        let dst = &mut out.as_mut_slice()[i * out_cols..(i + 1) * out_cols];
        for (j, d) in dst.iter_mut().enumerate() {
            let taps = &hplan.weights[j * hplan.width..(j + 1) * hplan.width];
            let left = hplan.starts[j];
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                let sc = (left + t as i64).clamp(0, in_cols as i64 - 1) as usize;
                acc += w * row[sc];
            }
            *d = acc;
        }
    }
    Ok(out)
}

/// Central crop to `rows x cols` (offsets round down).
pub fn center_crop(src: &Grid, rows: usize, cols: usize) -> Result<Grid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("center_crop: target must be at least 1x1"));
    }
    if rows > src.rows() || cols > src.cols() {
        return Err(Error::invalid(format!(
            "center_crop: target {rows}x{cols} exceeds source {}x{}",
            src.rows(),
            src.cols()
        )));
    }
    let r0 = (src.rows() - rows) / 2;
    let c0 = (src.cols() - cols) / 2;
    Ok(Grid::from_fn(rows, cols, |r, c| src[(r0 + r, c0 + c)]))
}

/// Crops bottom/right so both dimensions are multiples of `factor`.
pub fn modcrop(src: &Grid, factor: usize) -> Result<Grid> {
    if factor == 0 {
        return Err(Error::invalid("modcrop: factor must be at least 1"));
    }
    let rows = src.rows() - src.rows() % factor;
    let cols = src.cols() - src.cols() % factor;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "modcrop: {}x{} is smaller than factor {factor}",
            src.rows(),
            src.cols()
        )));
    }
    Ok(Grid::from_fn(rows, cols, |r, c| src[(r, c)]))
}

/// Builds one training pair from a ground-truth plane: center-crop to the
/// training size, bicubic-downscale by `upscale`, bicubic-upscale back, and
/// transform both planes. The training size must be a multiple of `upscale`.
pub fn make_pair(
    hr: &ImagePlane,
    upscale: usize,
    train_rows: usize,
    train_cols: usize,
) -> Result<TrainingSample> {
    if upscale < 2 {
        return Err(Error::invalid(format!("make_pair: upscale must be >= 2, got {upscale}")));
    }
    if train_rows == 0 || train_cols == 0 || train_rows % upscale != 0 || train_cols % upscale != 0
    {
        return Err(Error::invalid(format!(
            "make_pair: training size {train_rows}x{train_cols} must be a nonzero multiple of {upscale}"
        )));
    }
    let target_plane = center_crop(hr, train_rows, train_cols)?;
    let lr = bicubic_resize(&target_plane, train_rows / upscale, train_cols / upscale)?;
    let up = bicubic_resize(&lr, train_rows, train_cols)?;
    Ok(TrainingSample { input: dht2(&up)?, target: dht2(&target_plane)? })
}

/// Peak signal-to-noise ratio in dB; identical planes give `f64::INFINITY`.
pub fn psnr(a: &Grid, b: &Grid, peak: f64) -> Result<f64> {
    a.check_nonempty("psnr")?;
    a.check_same_dims(b, "psnr")?;
    if !(peak > 0.0) {
        return Err(Error::invalid(format!("psnr: peak must be positive, got {peak}")));
    }
    let mse = a.sub(b)?.sum_sq() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

const SSIM_SIDE: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> [f64; SSIM_SIDE] {
    let mut w = [0.0; SSIM_SIDE];
    let mid = (SSIM_SIDE / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable valid-mode windowed mean with a 1D window applied to both axes.
fn window_mean_valid(src: &Grid, win: &[f64]) -> Grid {
    let side = win.len();
    let (rows, cols) = src.dims();
    let (vrows, vcols) = (rows - side + 1, cols - side + 1);
    let mut mid = Grid::new(vrows, cols);
    for i in 0..vrows {
        let dst = &mut mid.as_mut_slice()[i * cols..(i + 1) * cols];
        for (t, &w) in win.iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(src.row(i + t)) {
                *d += w * s;
            }
        }
    }
    let mut out = Grid::new(vrows, vcols);
    for i in 0..vrows {
        let row = mid.row(i);
        let dst = &mut out.as_mut_slice()[i * vcols..(i + 1) * vcols];
        for (j, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &w) in win.iter().enumerate() {
                acc += w * row[j + t];
            }
            *d = acc;
        }
    }
    out
}

/// Mean structural similarity over an 11x11 Gaussian window
/// (`sigma = 1.5`, `K1 = 0.01`, `K2 = 0.03`) for planes in `[0, 1]`.
///
/// Windows are valid-mode (no padding), so both planes must be at least
/// 11x11. Moments are Gaussian-weighted means, not sample covariances.
pub fn ssim(a: &Grid, b: &Grid) -> Result<f64> {
    a.check_same_dims(b, "ssim")?;
    if a.rows() < SSIM_SIDE || a.cols() < SSIM_SIDE {
        return Err(Error::invalid(format!(
            "ssim: planes must be at least {SSIM_SIDE}x{SSIM_SIDE}, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let win = ssim_window();
    let mu_a = window_mean_valid(a, &win);
    let mu_b = window_mean_valid(b, &win);
    let aa = window_mean_valid(&a.hadamard(a)?, &win);
    let bb = window_mean_valid(&b.hadamard(b)?, &win);
    let ab = window_mean_valid(&a.hadamard(b)?, &win);

    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice()[i], mu_b.as_slice()[i]);
        let va = aa.as_slice()[i] - ma * ma;
        let vb = bb.as_slice()[i] - mb * mb;
        let cov = ab.as_slice()[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

/// Wall-clock milliseconds spent in each stage of a super-resolution run.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimes {
    /// Forward Hartley transform of the input plane.
    pub transform_ms: f64,
    /// Network forward pass plus residual composition.
    pub network_ms: f64,
    /// Inverse Hartley transform and clamping.
    pub inverse_ms: f64,
}

impl StageTimes {
    pub fn total_ms(&self) -> f64 {
        self.transform_ms + self.network_ms + self.inverse_ms
    }

    fn accumulate(&mut self, other: &StageTimes) {
        self.transform_ms += other.transform_ms;
        self.network_ms += other.network_ms;
        self.inverse_ms += other.inverse_ms;
    }
}

/// Enhances a bicubic-upscaled plane whose size matches the network exactly.
/// Returns the sharpened plane clamped to `[0, 1]`.
pub fn super_resolve(upscaled: &ImagePlane, params: &NetworkParams) -> Result<ImagePlane> {
    Ok(super_resolve_timed(upscaled, params)?.0)
}

/// [`super_resolve`] with per-stage wall-clock times.
pub fn super_resolve_timed(
    upscaled: &ImagePlane,
    params: &NetworkParams,
) -> Result<(ImagePlane, StageTimes)> {
    let mut times = StageTimes::default();

    let t0 = Instant::now();
    let f1 = dht2(upscaled)?;
    times.transform_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let trace = forward(&f1, params)?;
    let reconstruction = residual_compose(&trace.prediction, &f1)?;
    times.network_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let out = dht2(&reconstruction)?.map(|v| v.clamp(0.0, 1.0));
    times.inverse_ms = t2.elapsed().as_secs_f64() * 1e3;

    Ok((out, times))
}

/// Tile positions along one axis: stride `tile - overlap`, last tile snapped
/// to the end of the plane.
fn tile_positions(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    let step = tile - overlap;
    let mut positions = Vec::new();
    let mut pos = 0;
    while pos + tile < len {
        positions.push(pos);
        pos += step;
    }
    positions.push(len - tile);
    positions.dedup();
    positions
}

/// Edge-replicates `src` on the bottom/right out to `rows x cols`.
fn pad_edge(src: &Grid, rows: usize, cols: usize) -> Grid {
    Grid::from_fn(rows, cols, |r, c| src[(r.min(src.rows() - 1), c.min(src.cols() - 1))])
}

/// Enhances a plane of arbitrary size by running the network over
/// overlapping tiles and ramp-blending the seams.
///
/// A plane that matches the network size exactly is processed in one shot
/// (bit-identical to [`super_resolve`]); smaller planes are edge-padded up to
/// the tile size and cropped back. `overlap` must be smaller than the tile.
pub fn super_resolve_tiled(
    plane: &ImagePlane,
    params: &NetworkParams,
    overlap: usize,
) -> Result<ImagePlane> {
    Ok(super_resolve_tiled_timed(plane, params, overlap)?.0)
}

/// [`super_resolve_tiled`] with per-stage times accumulated over all tiles.
pub fn super_resolve_tiled_timed(
    plane: &ImagePlane,
    params: &NetworkParams,
    overlap: usize,
) -> Result<(ImagePlane, StageTimes)> {
    params.validate()?;
    plane.check_nonempty("super_resolve_tiled")?;
    let (tile_rows, tile_cols) = (params.arch.height, params.arch.width);
    if overlap >= tile_rows.min(tile_cols) {
        return Err(Error::invalid(format!(
            "super_resolve_tiled: overlap {overlap} must be smaller than the {tile_rows}x{tile_cols} tile"
        )));
    }
    if plane.dims() == (tile_rows, tile_cols) {
        return super_resolve_timed(plane, params);
    }
    let (rows, cols) = plane.dims();
    if rows < tile_rows || cols < tile_cols {
        let padded = pad_edge(plane, rows.max(tile_rows), cols.max(tile_cols));
        let (full, times) = super_resolve_tiled_timed(&padded, params, overlap)?;
        let cropped = Grid::from_fn(rows, cols, |r, c| full[(r, c)]);
        return Ok((cropped, times));
    }

    // Triangular ramp: weight 1 at the tile border rising to overlap + 1 in
    // the interior, so overlapping tiles cross-fade linearly.
    let ramp = |i: usize, tile: usize| (i + 1).min(tile - i).min(overlap + 1) as f64;
    let mut numerator = Grid::new(rows, cols);
    let mut denominator = Grid::new(rows, cols);
    let mut times = StageTimes::default();

    for &r0 in &tile_positions(rows, tile_rows, overlap) {
        for &c0 in &tile_positions(cols, tile_cols, overlap) {
            let tile = Grid::from_fn(tile_rows, tile_cols, |r, c| plane[(r0 + r, c0 + c)]);
            let (out, tile_times) = super_resolve_timed(&tile, params)?;
            times.accumulate(&tile_times);
            for r in 0..tile_rows {
                let wr = ramp(r, tile_rows);
                for c in 0..tile_cols {
                    let w = wr * ramp(c, tile_cols);
                    numerator[(r0 + r, c0 + c)] += w * out[(r, c)];
                    denominator[(r0 + r, c0 + c)] += w;
                }
            }
        }
    }

    let blended = numerator.zip_with(&denominator, |n, d| n / d)?;
    Ok((blended, times))
}

/// One evaluated image.
#[derive(Clone, Debug)]
pub struct EvalEntry {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Wall-clock milliseconds of the enhancement pipeline for this image.
    pub millis: f64,
}

/// Metrics for a set of images plus dataset means.
#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> Option<f64> {
        mean(self.entries.iter().map(|e| e.psnr_db))
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        mean(self.entries.iter().map(|e| e.ssim))
    }

    pub fn mean_millis(&self) -> Option<f64> {
        mean(self.entries.iter().map(|e| e.millis))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded_plane(rows: usize, cols: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn luma_anchors() {
        let black = RgbImage::splat(&Grid::new(2, 2));
        assert!((rgb_to_y(&black)[(0, 0)] - 16.0 / 255.0).abs() < 1e-12);
        let white = RgbImage::splat(&Grid::filled(2, 2, 1.0));
        assert!((rgb_to_y(&white)[(0, 0)] - 235.0 / 255.0).abs() < 1e-12);
        let red = RgbImage::from_planes(
            Grid::filled(1, 1, 1.0),
            Grid::new(1, 1),
            Grid::new(1, 1),
        )
        .unwrap();
        assert!((rgb_to_y(&red)[(0, 0)] - 0.319533).abs() < 1e-6);
    }

    #[test]
    fn ycbcr_round_trip() {
        let img = RgbImage::from_planes(
            seeded_plane(8, 8, 1),
            seeded_plane(8, 8, 2),
            seeded_plane(8, 8, 3),
        )
        .unwrap();
        let y = rgb_to_y(&img);
        let (cb, cr) = rgb_to_cbcr(&img);
        let back = ycbcr_to_rgb(&y, &cb, &cr).unwrap();
        assert!(back.r.max_abs_diff(&img.r).unwrap() < 1e-4);
        assert!(back.g.max_abs_diff(&img.g).unwrap() < 1e-4);
        assert!(back.b.max_abs_diff(&img.b).unwrap() < 1e-4);
    }

    #[test]
    fn gray_neutral_chroma() {
        let img = RgbImage::splat(&Grid::filled(2, 2, 0.42));
        let (cb, cr) = rgb_to_cbcr(&img);
        assert!((cb[(0, 0)] - 128.0 / 255.0).abs() < 1e-9);
        assert!((cr[(0, 0)] - 128.0 / 255.0).abs() < 1e-9);
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let src = seeded_plane(9, 14, 4);
        let out = bicubic_resize(&src, 9, 14).unwrap();
        assert!(out.max_abs_diff(&src).unwrap() < 1e-12);
    }

    #[test]
    fn resize_preserves_constants() {
        let src = Grid::filled(16, 12, 0.37);
        for &(r, c) in &[(8usize, 6usize), (32, 24), (5, 17), (16, 12)] {
            let out = bicubic_resize(&src, r, c).unwrap();
            assert!((out.max_abs() - 0.37).abs() < 1e-12);
            assert!(out.map(|v| v - 0.37).max_abs() < 1e-12);
        }
    }

    #[test]
    fn resize_tracks_linear_ramps() {
        // A linear ramp should survive down-and-up resampling in the
        // interior; bicubic reproduces affine signals exactly away from the
        // clamped edges.
        let src = Grid::from_fn(32, 32, |r, _| r as f64 / 31.0);
        let down = bicubic_resize(&src, 16, 16).unwrap();
        let up = bicubic_resize(&down, 32, 32).unwrap();
        for r in 4..28 {
            for c in 4..28 {
                assert!(
                    (up[(r, c)] - src[(r, c)]).abs() < 1e-3,
                    "ramp deviates at ({r},{c}): {} vs {}",
                    up[(r, c)],
                    src[(r, c)]
                );
            }
        }
    }

    #[test]
    fn resize_rejects_empty_shapes() {
        assert!(bicubic_resize(&Grid::new(0, 3), 2, 2).is_err());
        assert!(bicubic_resize(&Grid::filled(3, 3, 1.0), 0, 2).is_err());
    }

    #[test]
    fn crops() {
        let src = Grid::from_fn(6, 7, |r, c| (r * 10 + c) as f64);
        let crop = center_crop(&src, 2, 3).unwrap();
        assert_eq!(crop[(0, 0)], src[(2, 2)]);
        assert!(center_crop(&src, 7, 3).is_err());

        let m = modcrop(&src, 4).unwrap();
        assert_eq!(m.dims(), (4, 4));
        assert_eq!(m[(3, 3)], src[(3, 3)]);
        assert!(modcrop(&Grid::filled(3, 3, 0.0), 4).is_err());
    }

    #[test]
    fn make_pair_constant_plane_has_zero_residual() {
        let hr = Grid::filled(24, 24, 0.5);
        let pair = make_pair(&hr, 2, 16, 16).unwrap();
        // A constant plane is unchanged by resampling, so input == target.
        assert!(pair.input.max_abs_diff(&pair.target).unwrap() < 1e-12);
    }

    #[test]
    fn make_pair_validates_arguments() {
        let hr = Grid::filled(32, 32, 0.5);
        assert!(make_pair(&hr, 1, 16, 16).is_err());
        assert!(make_pair(&hr, 2, 15, 16).is_err());
        assert!(make_pair(&hr, 2, 48, 16).is_err());
    }

    #[test]
    fn psnr_anchors() {
        let a = seeded_plane(16, 16, 5);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 0.1);
        // Constant offset of 0.1: MSE = 0.01, PSNR = 20 dB.
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        assert!(psnr(&a, &Grid::new(4, 4), 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn ssim_anchors() {
        let a = seeded_plane(32, 32, 6);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let small = a.map(|v| (v + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let big = a.map(|v| (v + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0));
        let s_small = ssim(&a, &small).unwrap();
        let s_big = ssim(&a, &big).unwrap();
        assert!(s_small > s_big, "{s_small} vs {s_big}");
        assert!(s_small < 1.0 && s_small > 0.9);
        let sym = (ssim(&a, &small).unwrap() - ssim(&small, &a).unwrap()).abs();
        assert!(sym < 1e-12);
        assert!(ssim(&Grid::filled(8, 8, 0.5), &Grid::filled(8, 8, 0.5)).is_err());
    }

    #[test]
    fn window_mean_of_constant_is_constant() {
        let win = ssim_window();
        assert!((win.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = window_mean_valid(&Grid::filled(15, 13, 0.7), &win);
        assert_eq!(m.dims(), (5, 3));
        assert!(m.map(|v| v - 0.7).max_abs() < 1e-12);
    }

    #[test]
    fn tile_positions_cover_and_snap() {
        let pos = tile_positions(100, 32, 8);
        assert_eq!(pos.first(), Some(&0));
        assert_eq!(pos.last(), Some(&68));
        for w in pos.windows(2) {
            assert!(w[1] - w[0] <= 32 - 8);
        }
        // Degenerate: plane == tile.
        assert_eq!(tile_positions(32, 32, 8), vec![0]);
    }

    #[test]
    fn eval_report_means() {
        let report = EvalReport {
            entries: vec![
                EvalEntry { name: "a".into(), psnr_db: 30.0, ssim: 0.9, millis: 10.0 },
                EvalEntry { name: "b".into(), psnr_db: 34.0, ssim: 0.8, millis: 30.0 },
            ],
        };
        assert_eq!(report.mean_psnr(), Some(32.0));
        assert!((report.mean_ssim().unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(report.mean_millis(), Some(20.0));
        assert_eq!(EvalReport::default().mean_psnr(), None);
    }
}
