//! Ground states, the explicit blow-up solution, modulation, and the
//! symmetry transforms (Galilean, gauge, pseudo-conformal).

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;

use crate::error::{CmError, Result};
use crate::field::{Field, FieldWarning, GaugeTag};
use crate::grid::Grid1D;
use crate::interp::Interpolator;
use crate::spectral::{self, chi_values};

/// Modulation parameters g = (λ, γ, x), with γ kept in [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationParams {
    lambda: f64,
    gamma: f64,
    x: f64,
}

/// Representative of `a` in [0, 2π).
pub fn canonical_phase(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Circle distance between two phases.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = canonical_phase(a - b);
    d.min(TAU - d)
}

impl ModulationParams {
    pub fn new(lambda: f64, gamma: f64, x: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CmError::InvalidArgument(format!("λ = {lambda} must be positive")));
        }
        if !gamma.is_finite() || !x.is_finite() {
            return Err(CmError::InvalidArgument("γ and x must be finite".into()));
        }
        Ok(Self {
            lambda,
            gamma: canonical_phase(gamma),
            x,
        })
    }

    pub fn identity() -> Self {
        Self {
            lambda: 1.0,
            gamma: 0.0,
            x: 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

/// Parameters of `[[f]_inner]_outer`.
pub fn compose_params(outer: &ModulationParams, inner: &ModulationParams) -> ModulationParams {
    ModulationParams {
        lambda: outer.lambda * inner.lambda,
        gamma: canonical_phase(outer.gamma + inner.gamma),
        x: outer.x + outer.lambda * inner.x,
    }
}

/// The `g̃` with `compose_params(g_i, g̃) = g_j`.
pub fn relative_params(gi: &ModulationParams, gj: &ModulationParams) -> ModulationParams {
    ModulationParams {
        lambda: gj.lambda / gi.lambda,
        gamma: canonical_phase(gj.gamma - gi.gamma),
        x: (gj.x - gi.x) / gi.lambda,
    }
}

pub fn q_profile(y: f64) -> f64 {
    SQRT_2 / (1.0 + y * y).sqrt()
}

pub fn q_prime_profile(y: f64) -> f64 {
    -SQRT_2 * y * (1.0 + y * y).powf(-1.5)
}

/// ΛQ = Q/2 + yQ'.
pub fn lambda_q_profile(y: f64) -> f64 {
    0.5 * SQRT_2 * (1.0 - y * y) * (1.0 + y * y).powf(-1.5)
}

pub fn r_profile(y: f64) -> Complex64 {
    Complex64::new(SQRT_2, 0.0) / Complex64::new(y, 1.0)
}

/// Q = √2/√(1+x²), gauged.
pub fn ground_state_q(grid: Grid1D) -> Field {
    Field::from_real_fn(grid, GaugeTag::Gauged, q_profile)
}

/// 𝓡 = √2/(x+i), ungauged.
pub fn ground_state_r(grid: Grid1D) -> Field {
    Field::from_fn(grid, GaugeTag::Ungauged, r_profile)
}

/// `[Q]_g` sampled from the closed form.
pub fn modulated_q(grid: Grid1D, g: &ModulationParams) -> Field {
    let amp = Complex64::from_polar(g.lambda.powf(-0.5), g.gamma);
    Field::from_fn(grid, GaugeTag::Gauged, |y| {
        amp * q_profile((y - g.x) / g.lambda)
    })
}

/// `[𝓡]_g` sampled from the closed form.
pub fn modulated_r(grid: Grid1D, g: &ModulationParams) -> Field {
    let amp = Complex64::from_polar(g.lambda.powf(-0.5), g.gamma);
    Field::from_fn(grid, GaugeTag::Ungauged, |y| {
        amp * r_profile((y - g.x) / g.lambda)
    })
}

fn check_scale(grid: &Grid1D, lambda: f64) -> Result<()> {
    let (min, max) = (grid.dx(), grid.half_width());
    if !(lambda >= min && lambda <= max) {
        return Err(CmError::UnresolvableScale { lambda, min, max });
    }
    Ok(())
}

/// out(y) = amp · f((y - shift)/scale), with content mapped off the grid
/// dropped and recorded as a warning.
fn resample(f: &Field, scale: f64, shift: f64, amp: Complex64) -> Field {
    let g = f.grid();
    let l = g.half_width();
    let src = f.values();
    let it = Interpolator::new(g, &src);
    let data = (0..g.n())
        .map(|j| {
            it.eval((g.x(j) - shift) / scale)
                .map_or(Complex64::new(0.0, 0.0), |z| amp * z)
        })
        .collect();
    let lost = g.dx()
        * (0..g.n())
            .filter(|&j| {
                let y = scale * g.x(j) + shift;
                !(y >= -l && y < l)
            })
            .map(|j| src[j].norm_sqr())
            .sum::<f64>();
    let mut out = f.with_values(data);
    let total = f.norm_l2_sq();
    if lost > 1e-12 * total.max(f64::MIN_POSITIVE) {
        out.push_warning(FieldWarning::SupportTruncated { lost_mass: lost });
    }
    out
}

/// `[f]_g(y) = e^{iγ} λ^{-1/2} f((y - x)/λ)`.
pub fn modulate(f: &Field, g: &ModulationParams) -> Result<Field> {
    check_scale(&f.grid(), g.lambda)?;
    Ok(resample(
        f,
        g.lambda,
        g.x,
        Complex64::from_polar(g.lambda.powf(-0.5), g.gamma),
    ))
}

/// `[f]_g^{-1}(s) = e^{-iγ} λ^{1/2} f(λ s + x)`.
pub fn demodulate(f: &Field, g: &ModulationParams) -> Result<Field> {
    check_scale(&f.grid(), g.lambda)?;
    Ok(resample(
        f,
        1.0 / g.lambda,
        -g.x / g.lambda,
        Complex64::from_polar(g.lambda.sqrt(), -g.gamma),
    ))
}

/// Galilean boost `e^{icx - ic²t} f(x - 2ct)`; the shift is a Fourier phase.
pub fn galilean(f: &Field, c: f64, t: f64) -> Field {
    let g = f.grid();
    let a = 2.0 * c * t;
    let shifted = if a == 0.0 {
        f.values().into_owned()
    } else {
        spectral::apply_multiplier_raw(&g, &f.values(), |_, _, xi| {
            Complex64::from_polar(1.0, -xi * a)
        })
    };
    let data = shifted
        .iter()
        .enumerate()
        .map(|(j, &z)| z * Complex64::from_polar(1.0, c * g.x(j) - c * c * t))
        .collect();
    f.with_values(data)
}

/// Trapezoid running integral of |f|² from the left edge.
pub fn cumulative_mass(f: &Field) -> Vec<f64> {
    let dx = f.grid().dx();
    let m = f.modulus_sq();
    let mut out = Vec::with_capacity(m.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in m.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Mass left of -L assuming an x⁻² tail, the phase lost by starting the
/// running integral at the grid edge.
pub fn left_tail_mass_estimate(f: &Field) -> f64 {
    let v = f.values();
    v[0].norm_sqr() * f.grid().half_width()
}

fn gauge_twist(f: &Field, sign: f64) -> Vec<Complex64> {
    let phi = cumulative_mass(f);
    f.values()
        .iter()
        .zip(&phi)
        .map(|(&z, &p)| z * Complex64::from_polar(1.0, sign * 0.5 * p))
        .collect()
}

/// 𝒢(u) = u·exp(-(i/2)∫_{-L}^x |u|²), so that 𝒢(𝓡) = -Q.
pub fn gauge(u: &Field) -> Result<Field> {
    u.require_tag(GaugeTag::Ungauged)?;
    Ok(u.with_values(gauge_twist(u, -1.0)).with_tag(GaugeTag::Gauged))
}

/// 𝒢⁻¹(v) = v·exp(+(i/2)∫_{-L}^x |v|²).
pub fn gauge_inverse(v: &Field) -> Result<Field> {
    v.require_tag(GaugeTag::Gauged)?;
    Ok(v.with_values(gauge_twist(v, 1.0)).with_tag(GaugeTag::Ungauged))
}

/// Pseudo-conformal map of a snapshot taken at time `s`. Returns the image
/// snapshot `|t'|^{-1/2} e^{ix²/4t'} f(x/|t'|)` and its time `t' = -1/s`.
pub fn pseudo_conformal(f: &Field, s: f64) -> Result<(Field, f64)> {
    if s == 0.0 || !s.is_finite() {
        return Err(CmError::InvalidArgument(format!(
            "pseudo-conformal transform needs a finite nonzero time, got {s}"
        )));
    }
    let tp = -1.0 / s;
    let a = tp.abs();
    let stretched = modulate(f, &ModulationParams::new(a, 0.0, 0.0)?)?;
    let out = stretched.map_indexed(|x, z| z * Complex64::from_polar(1.0, x * x / (4.0 * tp)));
    Ok((out, tp))
}

/// Smallest power-of-two n resolving the chirp of S(t) on [-L, L).
pub fn required_n_for_chirp(t: f64, half_width: f64) -> usize {
    let need = half_width * half_width / (PI * t);
    let mut n = 8usize;
    while (n as f64) <= need {
        n *= 2;
    }
    n
}

/// S(t, x) = t^{-1/2} e^{ix²/4t} 𝓡(x/t).
pub fn explicit_blowup_s(t: f64, grid: Grid1D) -> Result<Field> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CmError::InvalidArgument(format!("S(t) needs t > 0, got {t}")));
    }
    let l = grid.half_width();
    if l / (2.0 * t) >= grid.k_max() {
        return Err(CmError::UnderResolvedChirp {
            t,
            n: grid.n(),
            required_n: required_n_for_chirp(t, l),
        });
    }
    let amp = t.powf(-0.5);
    Ok(Field::from_fn(grid, GaugeTag::Ungauged, |x| {
        Complex64::from_polar(amp, x * x / (4.0 * t)) * r_profile(x / t)
    }))
}

/// Λf = f/2 + x f'.
pub fn scaling_generator(f: &Field) -> Field {
    let d = spectral::derivative_line(f);
    let g = f.grid();
    let dv = d.values();
    f.with_values(
        f.values()
            .iter()
            .enumerate()
            .map(|(j, &z)| 0.5 * z + g.x(j) * dv[j])
            .collect(),
    )
}

/// Generators of the kernel of L_Q: (iQ, ΛQ, ∂ₓQ).
pub fn kernel_elements(grid: Grid1D) -> (Field, Field, Field) {
    (
        Field::from_fn(grid, GaugeTag::Gauged, |y| Complex64::new(0.0, q_profile(y))),
        Field::from_real_fn(grid, GaugeTag::Gauged, lambda_q_profile),
        Field::from_real_fn(grid, GaugeTag::Gauged, q_prime_profile),
    )
}

/// 𝒵₁ = ΛQχ, 𝒵₂ = iQχ, 𝒵₃ = ∂ₓQχ with the unit-radius cutoff.
pub fn truncated_kernels(grid: Grid1D) -> [Field; 3] {
    let c = chi_values(&grid, 1.0, 0.0);
    let (iq, lq, dq) = kernel_elements(grid);
    [lq.mul_real(&c), iq.mul_real(&c), dq.mul_real(&c)]
}
