//! Complex fields sampled on a [`Grid1D`].

use std::borrow::Cow;

use num_complex::Complex64;

use crate::error::{CmError, Result};
use crate::fft;
use crate::grid::Grid1D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Spectral,
}

/// Which of the two flows a field belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GaugeTag {
    /// `u`, solution of the ungauged equation.
    Ungauged,
    /// `v`, solution of the gauged equation.
    Gauged,
}

impl GaugeTag {
    pub fn code(self) -> u8 {
        match self {
            GaugeTag::Ungauged => 0,
            GaugeTag::Gauged => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(GaugeTag::Ungauged),
            1 => Some(GaugeTag::Gauged),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GaugeTag::Ungauged => "ungauged",
            GaugeTag::Gauged => "gauged",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldWarning {
    /// A cutoff whose support reaches past the grid edge.
    CutoffExceedsGrid { radius: f64 },
    /// Resampling dropped content that maps outside [-L, L).
    SupportTruncated { lost_mass: f64 },
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid1D,
    data: Vec<Complex64>,
    repr: Representation,
    tag: GaugeTag,
    warnings: Vec<FieldWarning>,
}

impl Field {
    pub fn from_samples(grid: Grid1D, tag: GaugeTag, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(CmError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.n(),
                samples.len()
            )));
        }
        Ok(Self::physical(grid, tag, samples))
    }

    pub(crate) fn physical(grid: Grid1D, tag: GaugeTag, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(grid.n(), data.len());
        Self {
            grid,
            data,
            repr: Representation::Physical,
            tag,
            warnings: Vec::new(),
        }
    }

    pub fn from_spectral(grid: Grid1D, tag: GaugeTag, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(CmError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.n(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid,
            data: coeffs,
            repr: Representation::Spectral,
            tag,
            warnings: Vec::new(),
        })
    }

    pub fn from_fn(grid: Grid1D, tag: GaugeTag, f: impl Fn(f64) -> Complex64) -> Self {
        let data = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Self::physical(grid, tag, data)
    }

    pub fn from_real_fn(grid: Grid1D, tag: GaugeTag, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, tag, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(grid: Grid1D, tag: GaugeTag) -> Self {
        Self::physical(grid, tag, vec![Complex64::new(0.0, 0.0); grid.n()])
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn tag(&self) -> GaugeTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: GaugeTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn warnings(&self) -> &[FieldWarning] {
        &self.warnings
    }

    pub fn push_warning(&mut self, w: FieldWarning) {
        self.warnings.push(w);
    }

    /// Raw storage in the current representation.
    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    /// Physical samples, transforming if needed.
    pub fn values(&self) -> Cow<'_, [Complex64]> {
        match self.repr {
            Representation::Physical => Cow::Borrowed(&self.data),
            Representation::Spectral => Cow::Owned(fft::inverse(&self.data)),
        }
    }

    /// Spectral coefficients, transforming if needed.
    pub fn coefficients(&self) -> Cow<'_, [Complex64]> {
        match self.repr {
            Representation::Spectral => Cow::Borrowed(&self.data),
            Representation::Physical => Cow::Owned(fft::forward(&self.data)),
        }
    }

    pub fn to_physical(mut self) -> Self {
        if self.repr == Representation::Spectral {
            fft::inverse_in_place(&mut self.data);
            self.repr = Representation::Physical;
        }
        self
    }

    pub fn to_spectral(mut self) -> Self {
        if self.repr == Representation::Physical {
            fft::forward_in_place(&mut self.data);
            self.repr = Representation::Spectral;
        }
        self
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.to_physical().data
    }

    /// New physical field on the same grid and tag, warnings carried over.
    pub fn with_values(&self, data: Vec<Complex64>) -> Self {
        let mut f = Self::physical(self.grid, self.tag, data);
        f.warnings = self.warnings.clone();
        f
    }

    /// New spectral field on the same grid and tag, warnings carried over.
    pub fn with_coefficients(&self, coeffs: Vec<Complex64>) -> Self {
        let mut f = Self::physical(self.grid, self.tag, coeffs);
        f.repr = Representation::Spectral;
        f.warnings = self.warnings.clone();
        f
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        self.with_values(self.values().iter().map(|&z| f(z)).collect())
    }

    pub fn map_indexed(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let g = self.grid;
        self.with_values(
            self.values()
                .iter()
                .enumerate()
                .map(|(j, &z)| f(g.x(j), z))
                .collect(),
        )
    }

    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(CmError::GridMismatch);
        }
        let a = self.values();
        let b = other.values();
        Ok(self.with_values(a.iter().zip(b.iter()).map(|(&p, &q)| f(p, q)).collect()))
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn mul_real(&self, w: &[f64]) -> Self {
        let v = self.values();
        self.with_values(v.iter().zip(w).map(|(&z, &r)| z * r).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Discrete L² norm, dx-weighted in physical space.
    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        let dx = self.grid.dx();
        match self.repr {
            Representation::Physical => dx * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            // Parseval: sum |f_j|^2 = (1/n) sum |F_k|^2.
            Representation::Spectral => {
                dx / self.grid.n() as f64 * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        let a = self.values();
        let b = other.values();
        a.iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &Field) -> f64 {
        let dx = self.grid.dx();
        let a = self.values();
        let b = other.values();
        (dx * a
            .iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>())
        .sqrt()
    }

    pub fn modulus_sq(&self) -> Vec<f64> {
        self.values().iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn require_tag(&self, expected: GaugeTag) -> Result<()> {
        if self.tag != expected {
            return Err(CmError::TagMismatch {
                expected,
                found: self.tag,
            });
        }
        Ok(())
    }
}

/// Real inner product `(f, g)_r = ∫ Re(conj(f) g)`.
pub fn inner_r(f: &Field, g: &Field) -> f64 {
    let dx = f.grid().dx();
    let a = f.values();
    let b = g.values();
    dx * a
        .iter()
        .zip(b.iter())
        .map(|(p, q)| p.re * q.re + p.im * q.im)
        .sum::<f64>()
}

/// Grid quadrature of a real density.
pub fn integrate(grid: &Grid1D, density: &[f64]) -> f64 {
    grid.dx() * density.iter().sum::<f64>()
}
