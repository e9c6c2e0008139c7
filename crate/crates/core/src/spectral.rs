//! Fourier multipliers: Hilbert transform, Szegő projections, |D|, D₊,
//! derivatives, and the smooth cutoffs χ_R, φ_R.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{CmError, Result};
use crate::fft;
use crate::field::{Field, FieldWarning, GaugeTag, Representation};
use crate::grid::Grid1D;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Apply a multiplier `m(j, mode, ξ)` to raw physical samples.
pub(crate) fn apply_multiplier_raw(
    grid: &Grid1D,
    data: &[Complex64],
    m: impl Fn(usize, i64, f64) -> Complex64,
) -> Vec<Complex64> {
    let mut c = fft::forward(data);
    for (j, z) in c.iter_mut().enumerate() {
        *z *= m(j, grid.mode(j), grid.wavenumber(j));
    }
    fft::inverse_in_place(&mut c);
    c
}

/// The result stays in the representation of `f`.
fn apply_multiplier(f: &Field, m: impl Fn(usize, i64, f64) -> Complex64) -> Field {
    let g = f.grid();
    let mut c = f.coefficients().into_owned();
    for (j, z) in c.iter_mut().enumerate() {
        *z *= m(j, g.mode(j), g.wavenumber(j));
    }
    if f.representation() == Representation::Spectral {
        return f.with_coefficients(c);
    }
    fft::inverse_in_place(&mut c);
    f.with_values(c)
}

fn is_nyquist(grid: &Grid1D, j: usize) -> bool {
    j == grid.nyquist_index()
}

pub(crate) fn hilbert_symbol(grid: &Grid1D, j: usize, k: i64) -> Complex64 {
    if k == 0 || is_nyquist(grid, j) {
        Complex64::new(0.0, 0.0)
    } else if k > 0 {
        -I
    } else {
        I
    }
}

/// ℋ with symbol -i·sgn(ξ); zero on the mean and the Nyquist mode.
pub fn hilbert(f: &Field) -> Field {
    let g = f.grid();
    apply_multiplier(f, |j, k, _| hilbert_symbol(&g, j, k))
}

/// Π₊, keeps strictly positive wavenumbers.
pub fn szego_project(f: &Field) -> Field {
    apply_multiplier(f, |_, k, _| Complex64::new(if k > 0 { 1.0 } else { 0.0 }, 0.0))
}

/// Π₋, keeps negative wavenumbers including the Nyquist mode.
pub fn szego_minus(f: &Field) -> Field {
    apply_multiplier(f, |_, k, _| Complex64::new(if k < 0 { 1.0 } else { 0.0 }, 0.0))
}

/// ½(1 + iℋ): Π₊ with half weight on the mean and the Nyquist mode.
pub fn szego_symmetric(f: &Field) -> Field {
    let g = f.grid();
    apply_multiplier(f, |j, k, _| {
        let w = if k == 0 || is_nyquist(&g, j) {
            0.5
        } else if k > 0 {
            1.0
        } else {
            0.0
        };
        Complex64::new(w, 0.0)
    })
}

/// |D| with symbol |ξ|; Nyquist mode removed.
pub fn abs_deriv(f: &Field) -> Field {
    let g = f.grid();
    apply_multiplier(f, |j, _, xi| {
        Complex64::new(if is_nyquist(&g, j) { 0.0 } else { xi.abs() }, 0.0)
    })
}

/// D₊ = -i∂ₓΠ₊ with symbol ξ·1_{ξ>0}.
pub fn dplus(f: &Field) -> Field {
    apply_multiplier(f, |_, k, xi| Complex64::new(if k > 0 { xi } else { 0.0 }, 0.0))
}

pub(crate) fn derivative_symbol(grid: &Grid1D, j: usize, xi: f64) -> Complex64 {
    if is_nyquist(grid, j) {
        Complex64::new(0.0, 0.0)
    } else {
        I * xi
    }
}

/// ∂ₓ with symbol iξ; the Nyquist mode is dropped so real fields stay real.
pub fn derivative(f: &Field) -> Field {
    let g = f.grid();
    apply_multiplier(f, |j, _, xi| derivative_symbol(&g, j, xi))
}

/// ∂ₓₓ with symbol -ξ².
pub fn second_derivative(f: &Field) -> Field {
    apply_multiplier(f, |_, _, xi| Complex64::new(-xi * xi, 0.0))
}

/// ∂ₓ for a field viewed as a function on the interval rather than the circle.
///
/// The jump between the two edges is removed with a linear ramp before the
/// spectral derivative and the ramp slope is added back. Slowly decaying
/// profiles such as 𝓡 have an O(1/L) edge jump whose periodic derivative
/// would otherwise be a spike.
pub fn derivative_line(f: &Field) -> Field {
    let g = f.grid();
    let v = f.values();
    let jump: Complex64 = edge_weights(g.n()).iter().map(|&(j, a)| v[j] * a).sum();
    let slope = jump / (2.0 * g.half_width());
    let ramp_free: Vec<Complex64> = v
        .iter()
        .enumerate()
        .map(|(j, &z)| z - slope * (g.x(j) + g.half_width()))
        .collect();
    let mut d = apply_multiplier_raw(&g, &ramp_free, |j, _, xi| derivative_symbol(&g, j, xi));
    for z in d.iter_mut() {
        *z += slope;
    }
    f.with_values(d)
}

/// Edge-extrapolation weights: jump = Σ a_j f_j over the five edge samples.
fn edge_weights(n: usize) -> [(usize, f64); 5] {
    [(0, -1.0), (n - 4, -1.0), (n - 3, 4.0), (n - 2, -6.0), (n - 1, 4.0)]
}

/// Exact adjoint of [`derivative_line`] for the real inner product.
///
/// `derivative_line` is `∂ + c(f)·w` with `w = 1 - ∂r` for the ramp `r`, so
/// its adjoint is `-∂g` plus `c*` applied to `∫ w g`, supported on the edge
/// samples that define the jump.
pub fn derivative_line_adjoint(f: &Field) -> Field {
    let g = f.grid();
    let n = g.n();
    let ramp: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(g.x(j) + g.half_width(), 0.0))
        .collect();
    let dr = apply_multiplier_raw(&g, &ramp, |j, _, xi| derivative_symbol(&g, j, xi));
    let v = f.values();
    let wg: Complex64 = v
        .iter()
        .zip(&dr)
        .map(|(&z, d)| z * (1.0 - d.re))
        .sum::<Complex64>();
    let mut out = apply_multiplier_raw(&g, &v, |j, _, xi| -derivative_symbol(&g, j, xi));
    let s = 1.0 / (2.0 * g.half_width());
    for (j, a) in edge_weights(n) {
        out[j] += wg * (a * s);
    }
    f.with_values(out)
}

/// The cutoff profile χ: 1 on [-1, 1], cos² ramp to 0 on 1 < |s| < 2.
pub fn chi(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0
    } else if a < 2.0 {
        let c = (PI * (a - 1.0) / 2.0).cos();
        c * c
    } else {
        0.0
    }
}

/// Derivative of [`chi`].
pub fn chi_prime(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 || a >= 2.0 {
        0.0
    } else {
        let th = PI * (a - 1.0) / 2.0;
        -(PI / 2.0) * (2.0 * th).sin() * s.signum()
    }
}

/// Sharp constant in |χ'|² ≤ C χ for the cos² ramp.
pub const CHI_CONSTANT: f64 = PI * PI;

/// χ((x - center)/R) on the grid.
pub fn chi_values(grid: &Grid1D, radius: f64, center: f64) -> Vec<f64> {
    (0..grid.n())
        .map(|j| chi((grid.x(j) - center) / radius))
        .collect()
}

fn cutoff_field(grid: Grid1D, radius: f64, outer: bool) -> Result<Field> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CmError::InvalidArgument(format!(
            "cutoff radius {radius} must be positive"
        )));
    }
    let vals = chi_values(&grid, radius, 0.0);
    let mut f = Field::from_samples(
        grid,
        GaugeTag::Gauged,
        vals.iter()
            .map(|&c| Complex64::new(if outer { 1.0 - c } else { c }, 0.0))
            .collect(),
    )?;
    if 2.0 * radius > grid.half_width() {
        f.push_warning(FieldWarning::CutoffExceedsGrid { radius });
    }
    Ok(f)
}

/// χ_R as a real field. The gauge tag of a cutoff carries no meaning.
pub fn cutoff_chi(grid: Grid1D, radius: f64) -> Result<Field> {
    cutoff_field(grid, radius, false)
}

/// φ_R = 1 - χ_R.
pub fn cutoff_phi(grid: Grid1D, radius: f64) -> Result<Field> {
    cutoff_field(grid, radius, true)
}
