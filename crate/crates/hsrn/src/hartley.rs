//! Orthonormal 2D discrete Hartley transform.
//!
//! The transform of an `R x C` plane is
//!
//! ```text
//! T(u, v) = (1 / sqrt(R*C)) * sum_{x,y} f(x, y) * cas(2*pi*(u*x/R + v*y/C))
//! ```
//!
//! with `cas(t) = cos(t) + sin(t)`. Note the single 2D `cas` kernel: this is
//! *not* the separable row-column composition of 1D Hartley transforms, which
//! computes a different (cas-cas) transform. With the `1/sqrt(R*C)` scaling
//! the transform is orthonormal and involutory — applying it twice returns
//! the input — so the same function serves as its own inverse.
//!
//! [`dht2`] reaches the transform through a complex 2D FFT using the identity
//! `H = Re(F) - Im(F)` (negative-exponent DFT), which keeps large planes at
//! `O(n log n)`. [`dht2_oracle`] is the literal quadratic-cost double sum,
//! kept as an independent reference for testing.

use std::cell::RefCell;
use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{FrequencyMap, Grid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Largest side accepted by [`dht2_oracle`]; the oracle is O((R*C)^2).
pub const ORACLE_MAX_SIDE: usize = 64;

fn check_input(plane: &Grid, what: &str) -> Result<()> {
    plane.check_nonempty(what)?;
    if !plane.is_finite() {
        return Err(Error::invalid(format!("{what}: input contains non-finite values")));
    }
    Ok(())
}

/// Unnormalized 2D DFT with negative exponent, row FFTs then column FFTs.
fn dft2_unscaled(plane: &Grid) -> Vec<Complex64> {
    let (rows, cols) = plane.dims();
    let mut buf: Vec<Complex64> = plane
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();

    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let row_fft = planner.plan_fft_forward(cols);
        let col_fft = planner.plan_fft_forward(rows);
        drop(planner);

        row_fft.process(&mut buf);

        let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = buf[r * cols + c];
            }
        }
        col_fft.process(&mut t);
        for r in 0..rows {
            for c in 0..cols {
                buf[r * cols + c] = t[c * rows + r];
            }
        }
    });

    buf
}

/// Orthonormal 2D discrete Hartley transform (its own inverse).
pub fn dht2(plane: &Grid) -> Result<FrequencyMap> {
    check_input(plane, "dht2")?;
    let (rows, cols) = plane.dims();
    let spectrum = dft2_unscaled(plane);
    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    let data = spectrum.iter().map(|z| (z.re - z.im) * norm).collect();
    Grid::from_vec(rows, cols, data)
}

/// Direct double-sum Hartley transform; independent reference for [`dht2`].
///
/// Rejects planes larger than [`ORACLE_MAX_SIDE`] on either side. Angles are
/// reduced modulo the period in exact integer arithmetic before the `cas`
/// evaluation to keep the reference accurate.
pub fn dht2_oracle(plane: &Grid) -> Result<FrequencyMap> {
    check_input(plane, "dht2_oracle")?;
    let (rows, cols) = plane.dims();
    if rows > ORACLE_MAX_SIDE || cols > ORACLE_MAX_SIDE {
        return Err(Error::invalid(format!(
            "dht2_oracle: {rows}x{cols} exceeds the {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE} oracle limit"
        )));
    }
    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    let mut out = Grid::new(rows, cols);
    for u in 0..rows {
        for v in 0..cols {
            let mut acc = 0.0;
            for x in 0..rows {
                let row_phase = (u * x % rows) as f64 / rows as f64;
                for y in 0..cols {
                    let col_phase = (v * y % cols) as f64 / cols as f64;
                    let angle = TAU * (row_phase + col_phase);
                    acc += plane[(x, y)] * (angle.cos() + angle.sin());
                }
            }
            out[(u, v)] = acc * norm;
        }
    }
    Ok(out)
}

/// Real and imaginary parts of the orthonormal 2D DFT (negative exponent).
///
/// Satisfies `dht2(f) = re - im` elementwise, which ties the Hartley
/// implementation to an independently checkable Fourier decomposition.
pub fn fourier_parts(plane: &Grid) -> Result<(FrequencyMap, FrequencyMap)> {
    check_input(plane, "fourier_parts")?;
    let (rows, cols) = plane.dims();
    let spectrum = dft2_unscaled(plane);
    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    let re = spectrum.iter().map(|z| z.re * norm).collect();
    let im = spectrum.iter().map(|z| z.im * norm).collect();
    Ok((Grid::from_vec(rows, cols, re)?, Grid::from_vec(rows, cols, im)?))
}

/// Direct circular convolution, O((R*C)^2); test-grade only.
fn circular_convolve_direct(f: &Grid, g: &Grid) -> Grid {
    let (rows, cols) = f.dims();
    let mut out = Grid::new(rows, cols);
    for x in 0..rows {
        for y in 0..cols {
            let mut acc = 0.0;
            for p in 0..rows {
                let gr = (x + rows - p) % rows;
                for q in 0..cols {
                    let gc = (y + cols - q) % cols;
                    acc += f[(p, q)] * g[(gr, gc)];
                }
            }
            out[(x, y)] = acc;
        }
    }
    out
}

/// Checks the convolution theorem for a circularly even kernel `g`:
/// `dht2(f circ* g)` must equal `sqrt(R*C) * dht2(f) .* dht2(g)`.
///
/// Returns the largest absolute deviation between the two sides. `g` must be
/// exactly circularly even (`g(x, y) == g((R-x) mod R, (C-y) mod C)`);
/// otherwise the identity does not hold and the call is rejected.
pub fn hartley_conv_check(f: &Grid, g: &Grid) -> Result<f64> {
    check_input(f, "hartley_conv_check")?;
    check_input(g, "hartley_conv_check")?;
    f.check_same_dims(g, "hartley_conv_check")?;
    let (rows, cols) = f.dims();
    for x in 0..rows {
        for y in 0..cols {
            let mirrored = g[((rows - x) % rows, (cols - y) % cols)];
            if g[(x, y)] != mirrored {
                return Err(Error::invalid(format!(
                    "hartley_conv_check: kernel is not circularly even at ({x}, {y})"
                )));
            }
        }
    }

    let convolved = circular_convolve_direct(f, g);
    let lhs = dht2(&convolved)?;
    let scale = ((rows * cols) as f64).sqrt();
    let rhs = dht2(f)?.hadamard(&dht2(g)?)?.scaled(scale);
    lhs.max_abs_diff(&rhs)
}
