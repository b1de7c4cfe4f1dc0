//! Binary model serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HSRN"
//! 4       2     format version (currently 1)
//! 6       2     flags; bit 0 = tie_symmetric_weights
//! 8       4     layers (u32)
//! 12      4     kernels_per_layer (u32)
//! 16      4     half_width (u32)
//! 20      4     height (u32)
//! 24      4     width (u32)
//! 28      4     upscale (u32)
//! 32      1     loss kind (0 = l1, 1 = l2, 2 = exp-l2)
//! 33      7     reserved, must be zero
//! 40      ...   payload: f64 LE values
//! ```
//!
//! The payload holds, in order: all weight maps (layer-major, row-major
//! within a map), all bias maps, all kernels, the mixing coefficients, and
//! the final weight map. The header fully determines the payload length;
//! any mismatch, unknown magic/version, nonzero reserved byte, or non-finite
//! value is rejected as corrupt.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use hsrn::network::{NetworkArch, NetworkParams};
use hsrn::training::LossKind;
use hsrn::Grid;

use crate::{CliError, CliResult};

pub const MAGIC: [u8; 4] = *b"HSRN";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 40;

/// Upper bounds applied before allocating payload buffers.
const MAX_LAYERS: u32 = 4096;
const MAX_KERNELS: u32 = 4096;
const MAX_HALF_WIDTH: u32 = 4096;
const MAX_SIDE: u32 = 1 << 16;
const MAX_UPSCALE: u32 = 64;

/// A trained network plus the metadata needed to apply it.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: NetworkParams,
    /// Upscale factor the model was trained for.
    pub upscale: usize,
    /// Loss the model was trained with (provenance only).
    pub loss: LossKind,
}

fn loss_to_byte(loss: LossKind) -> u8 {
    match loss {
        LossKind::L1 => 0,
        LossKind::L2 => 1,
        LossKind::ExpL2 => 2,
    }
}

fn loss_from_byte(byte: u8) -> CliResult<LossKind> {
    match byte {
        0 => Ok(LossKind::L1),
        1 => Ok(LossKind::L2),
        2 => Ok(LossKind::ExpL2),
        other => Err(CliError::CorruptModel(format!("unknown loss kind byte {other}"))),
    }
}

/// Number of payload f64 values implied by an architecture.
fn payload_values(arch: &NetworkArch) -> usize {
    let per_map = arch.height * arch.width;
    let side = arch.kernel_side();
    arch.branch_count() * (2 * per_map + side * side) + arch.layers + per_map
}

/// Serializes a model to bytes.
pub fn encode(model: &Model) -> CliResult<Vec<u8>> {
    let params = &model.params;
    params.validate().map_err(|e| CliError::Other(format!("refusing to save: {e}")))?;
    if !params.is_finite() {
        return Err(CliError::Other("refusing to save: parameters contain non-finite values".into()));
    }
    if model.upscale < 2 || model.upscale > MAX_UPSCALE as usize {
        return Err(CliError::Other(format!(
            "refusing to save: upscale {} out of range 2..={MAX_UPSCALE}",
            model.upscale
        )));
    }
    let arch = &params.arch;
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload_values(arch) * 8);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let flags: u16 = if arch.tie_symmetric_weights { 1 } else { 0 };
    bytes.extend_from_slice(&flags.to_le_bytes());
    for dim in [
        arch.layers,
        arch.kernels_per_layer,
        arch.half_width,
        arch.height,
        arch.width,
        model.upscale,
    ] {
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    bytes.push(loss_to_byte(model.loss));
    bytes.extend_from_slice(&[0u8; 7]);

    let push_grid = |bytes: &mut Vec<u8>, grid: &Grid| {
        for &v in grid.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    };
    for grid in params.weights.iter().chain(&params.biases).chain(&params.kernels) {
        push_grid(&mut bytes, grid);
    }
    for &v in &params.layer_mix {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    push_grid(&mut bytes, &params.final_weight);
    Ok(bytes)
}

/// Parses a model from bytes, rejecting anything malformed as corrupt.
pub fn decode(bytes: &[u8]) -> CliResult<Model> {
    let corrupt = |msg: &str| CliError::CorruptModel(format!("model file: {msg}"));
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("shorter than the fixed header"));
    }
    if bytes[0..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = LittleEndian::read_u16(&bytes[4..6]);
    if version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {version}")));
    }
    let flags = LittleEndian::read_u16(&bytes[6..8]);
    if flags > 1 {
        return Err(corrupt(&format!("unknown flag bits {flags:#06x}")));
    }
    let layers = LittleEndian::read_u32(&bytes[8..12]);
    let kernels_per_layer = LittleEndian::read_u32(&bytes[12..16]);
    let half_width = LittleEndian::read_u32(&bytes[16..20]);
    let height = LittleEndian::read_u32(&bytes[20..24]);
    let width = LittleEndian::read_u32(&bytes[24..28]);
    let upscale = LittleEndian::read_u32(&bytes[28..32]);
    let loss = loss_from_byte(bytes[32])?;
    if bytes[33..40].iter().any(|&b| b != 0) {
        return Err(corrupt("nonzero reserved bytes"));
    }
    if layers == 0 || layers > MAX_LAYERS {
        return Err(corrupt(&format!("layers {layers} out of range")));
    }
    if kernels_per_layer == 0 || kernels_per_layer > MAX_KERNELS {
        return Err(corrupt(&format!("kernels_per_layer {kernels_per_layer} out of range")));
    }
    if half_width > MAX_HALF_WIDTH {
        return Err(corrupt(&format!("half_width {half_width} out of range")));
    }
    if height == 0 || height > MAX_SIDE || width == 0 || width > MAX_SIDE {
        return Err(corrupt(&format!("plane size {height}x{width} out of range")));
    }
    if upscale < 2 || upscale > MAX_UPSCALE {
        return Err(corrupt(&format!("upscale {upscale} out of range")));
    }

    let arch = NetworkArch {
        layers: layers as usize,
        kernels_per_layer: kernels_per_layer as usize,
        half_width: half_width as usize,
        height: height as usize,
        width: width as usize,
        tie_symmetric_weights: flags & 1 != 0,
    };
    arch.validate().map_err(|e| corrupt(&e.to_string()))?;

    let expected = payload_values(&arch);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected * 8 {
        return Err(corrupt(&format!(
            "payload length {} does not match header (expected {} bytes)",
            payload.len(),
            expected * 8
        )));
    }

    fn take_grid(values: &mut impl Iterator<Item = f64>, rows: usize, cols: usize) -> Grid {
        Grid::from_fn(rows, cols, |_, _| values.next().expect("length checked"))
    }
    let mut values = payload.chunks_exact(8).map(LittleEndian::read_f64);
    let (h, w) = (arch.height, arch.width);
    let side = arch.kernel_side();
    let branches = arch.branch_count();
    let weights: Vec<Grid> = (0..branches).map(|_| take_grid(&mut values, h, w)).collect();
    let biases: Vec<Grid> = (0..branches).map(|_| take_grid(&mut values, h, w)).collect();
    let kernels: Vec<Grid> =
        (0..branches).map(|_| take_grid(&mut values, side, side)).collect();
    let layer_mix: Vec<f64> = values.by_ref().take(arch.layers).collect();
    let final_weight = take_grid(&mut values, h, w);

    let params = NetworkParams { arch, weights, biases, kernels, layer_mix, final_weight };
    params.validate().map_err(|e| corrupt(&e.to_string()))?;
    if !params.is_finite() {
        return Err(corrupt("payload contains non-finite values"));
    }
    Ok(Model { params, upscale: upscale as usize, loss })
}

/// Writes a model file.
pub fn save(path: &Path, model: &Model) -> CliResult<()> {
    let bytes = encode(model)?;
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Other(format!("writing {}: {e}", path.display())))
}

/// Reads a model file. Unreadable paths are usage errors; undecodable
/// contents are corrupt-model errors (exit 4).
pub fn load(path: &Path) -> CliResult<Model> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
    decode(&bytes)
}
