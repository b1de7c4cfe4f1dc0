//! Dense row-major `f64` planes.
//!
//! A [`Grid`] is the one container every stage agrees on: spatial planes,
//! Hartley spectra, per-frequency weights, and smoothing kernels are all
//! grids. The aliases [`ImagePlane`] and [`FrequencyMap`] mark which domain
//! a value lives in without introducing separate types.

use crate::error::{Error, Result};

/// A spatial plane; values are nominally in `[0, 1]` for image data.
pub type ImagePlane = Grid;

/// A Hartley-domain plane; values are unbounded reals.
pub type FrequencyMap = Grid;

/// Dense `rows x cols` matrix of `f64`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    /// Zero-filled grid.
    pub fn new(rows: usize, cols: usize) -> Grid {
        Grid { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Constant-filled grid.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Grid {
        Grid { rows, cols, data: vec![value; rows * cols] }
    }

    /// Wraps a row-major vector; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Grid> {
        if data.len() != rows * cols {
            return Err(Error::mismatch(format!(
                "grid of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Grid { rows, cols, data })
    }

    /// Builds a grid by evaluating `f(row, col)` at every cell.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Grid {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Borrow of row `r` as a contiguous slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_dims(&self, other: &Grid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn check_same_dims(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::mismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub(crate) fn check_nonempty(&self, what: &str) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            Err(Error::invalid(format!("{what}: dimensions must be at least 1x1")))
        } else {
            Ok(())
        }
    }

    /// Applies `f` to every entry.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combines two same-shaped grids entry by entry.
    pub fn zip_with(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        self.check_same_dims(other, "zip_with")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Grid { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Grid) -> Result<Grid> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scaled(&self, s: f64) -> Grid {
        self.map(|v| v * s)
    }

    /// Accumulates `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &Grid, scale: f64) -> Result<()> {
        self.check_same_dims(other, "add_scaled")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Largest absolute entry difference between two same-shaped grids.
    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        self.check_same_dims(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Grid {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Grid {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(2, 3, vec![0.0; 6]).is_ok());
        assert!(Grid::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let g = Grid::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 2)], 3.0);
        assert_eq!(g[(1, 0)], 4.0);
        assert_eq!(g.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn elementwise_ops() {
        let a = Grid::from_vec(1, 3, vec![1.0, -2.0, 3.0]).unwrap();
        let b = Grid::from_vec(1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(a.add(&b).unwrap().as_slice(), &[1.5, -1.5, 3.5]);
        assert_eq!(a.hadamard(&b).unwrap().as_slice(), &[0.5, -1.0, 1.5]);
        assert_eq!(a.sum(), 2.0);
        assert_eq!(a.sum_sq(), 14.0);
        assert_eq!(a.max_abs(), 3.0);
        assert!(a.add(&Grid::new(2, 2)).is_err());
    }

    #[test]
    fn max_abs_diff_matches_manual() {
        let a = Grid::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Grid::from_vec(2, 2, vec![1.0, 2.5, 2.0, 4.0]).unwrap();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 1.0);
    }
}
