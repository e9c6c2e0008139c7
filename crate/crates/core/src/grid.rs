//! Uniform periodic grid on [-L, L) and its wavenumber ladder.

use std::f64::consts::PI;

use crate::error::{CmError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    n: usize,
    half_width: f64,
}

impl Grid1D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(CmError::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(CmError::InvalidGrid(format!(
                "half width L = {half_width} must be positive and finite"
            )));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Integer mode number of FFT slot `j`; the Nyquist slot maps to -n/2.
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        PI * self.mode(j) as f64 / self.half_width
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// Largest resolved wavenumber, pi/dx.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(4, 1.0).is_err());
        assert!(Grid1D::new(12, 1.0).is_err());
        assert!(Grid1D::new(16, 0.0).is_err());
        assert!(Grid1D::new(16, f64::NAN).is_err());
        assert!(Grid1D::new(16, 1.0).is_ok());
    }

    #[test]
    fn ladder_layout() {
        let g = Grid1D::new(16, 2.0).unwrap();
        assert!((g.dx() * 16.0 - 4.0).abs() < 1e-15);
        assert_eq!(g.mode(0), 0);
        assert_eq!(g.mode(7), 7);
        assert_eq!(g.mode(8), -8);
        assert_eq!(g.mode(15), -1);
        for j in 1..8 {
            assert_eq!(g.wavenumber(j), -g.wavenumber(16 - j));
        }
        assert_eq!(g.x(0), -2.0);
    }
}
