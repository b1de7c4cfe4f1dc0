//! Fast single-image super-resolution in the Hartley domain.
//!
//! The pipeline upscales an image with bicubic interpolation, takes the
//! orthonormal 2D discrete Hartley transform of the luma plane, and runs a
//! small network of per-frequency weightings and circular smoothing kernels
//! to predict a residual spectrum. Adding the residual back onto the bicubic
//! spectrum and inverting the transform yields the sharpened image.
//!
//! Layout:
//! - [`grid`]: dense row-major `f64` planes shared by every stage.
//! - [`hartley`]: the transform, a brute-force oracle, and convolution
//!   identities used to validate it.
//! - [`network`]: parameters, forward evaluation, and hand-derived gradients.
//! - [`training`]: losses, SGD with gradient clamping, and the training loop.
//! - [`imaging`]: color conversion, bicubic resampling, PSNR/SSIM, and the
//!   end-to-end super-resolution entry points.

pub mod error;
pub mod grid;
pub mod hartley;
pub mod imaging;
pub mod network;
pub mod training;

pub use error::{Error, Result};
pub use grid::{FrequencyMap, Grid, ImagePlane};
