//! Conserved quantities, energies, the Bogomol'nyi and linearized operators,
//! adapted norms, virial quantities, the local mass flux bound, and the Lax
//! spectrum diagnostic.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CmError, Result};
use crate::evolution::Trajectory;
use crate::fft;
use crate::field::{inner_r, integrate, Field, GaugeTag};
use crate::grid::Grid1D;
use crate::spectral::{chi_values, derivative_line, derivative_line_adjoint, hilbert, szego_symmetric};
use crate::states::{ground_state_q, kernel_elements, truncated_kernels};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// ‖Q‖_{Ḣ¹} = ‖Q'‖ = √π/2.
pub const Q_HDOT1_NORM: f64 = 0.886_226_925_452_758;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedSet {
    pub t: f64,
    pub tag: GaugeTag,
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirialPair {
    pub v1: f64,
    pub v2: f64,
}

fn real_field(like: &Field, vals: Vec<f64>) -> Field {
    like.with_values(vals.into_iter().map(|r| Complex64::new(r, 0.0)).collect())
}

fn real_parts(f: &Field) -> Vec<f64> {
    f.values().iter().map(|z| z.re).collect()
}

/// ℋ applied to a real density, returned as real samples.
fn hilbert_real(like: &Field, density: Vec<f64>) -> Vec<f64> {
    real_parts(&hilbert(&real_field(like, density)))
}

pub fn mass(f: &Field) -> f64 {
    f.norm_l2_sq()
}

/// D_v v = ∂ₓv + ½ℋ(|v|²)v.
pub fn bogomolnyi(v: &Field) -> Field {
    let h = hilbert_real(v, v.modulus_sq());
    let d = derivative_line(v);
    let dv = d.values();
    v.with_values(
        v.values()
            .iter()
            .zip(dv.iter())
            .zip(&h)
            .map(|((&z, &dz), &hh)| dz + 0.5 * hh * z)
            .collect(),
    )
}

/// ∂ₓu - iΠ₊(|u|²)u, whose half squared norm is the ungauged energy. The
/// projection carries half weight on the mean, matching Π₊ on the line where
/// the zero frequency has measure zero.
pub fn bogomolnyi_ungauged(u: &Field) -> Field {
    let p = szego_symmetric(&real_field(u, u.modulus_sq()));
    let pv = p.values();
    let d = derivative_line(u);
    let dv = d.values();
    u.with_values(
        u.values()
            .iter()
            .zip(dv.iter())
            .zip(pv.iter())
            .map(|((&z, &dz), &pp)| dz - I * pp * z)
            .collect(),
    )
}

/// E(v) = ½‖D_v v‖² for gauged fields, Ẽ(u) = ½‖∂ₓu - iΠ₊(|u|²)u‖² for
/// ungauged ones. Both are evaluated as complete squares.
pub fn energy(f: &Field, tag: GaugeTag) -> f64 {
    match tag {
        GaugeTag::Gauged => 0.5 * bogomolnyi(f).norm_l2_sq(),
        GaugeTag::Ungauged => 0.5 * bogomolnyi_ungauged(f).norm_l2_sq(),
    }
}

/// P(v) = ∫Im(v̄ ∂ₓv) gauged; P̃(u) = Re∫(ū(-i∂ₓ)u - ½|u|⁴) ungauged.
pub fn momentum(f: &Field, tag: GaugeTag) -> f64 {
    let d = derivative_line(f);
    let v = f.values();
    let dv = d.values();
    let g = f.grid();
    let dens: Vec<f64> = match tag {
        GaugeTag::Gauged => v.iter().zip(dv.iter()).map(|(z, dz)| (z.conj() * dz).im).collect(),
        GaugeTag::Ungauged => v
            .iter()
            .zip(dv.iter())
            .map(|(z, dz)| (z.conj() * (-I) * dz).re - 0.5 * z.norm_sqr().powi(2))
            .collect(),
    };
    integrate(&g, &dens)
}

pub fn conserved(f: &Field, t: f64) -> ConservedSet {
    let tag = f.tag();
    ConservedSet {
        t,
        tag,
        mass: mass(f),
        energy: energy(f, tag),
        momentum: momentum(f, tag),
    }
}

/// L_v ε = ∂ₓε + ½ℋ(|v|²)ε + vℋ(Re(v̄ε)).
pub fn linearized(v: &Field, eps: &Field) -> Field {
    let vv = v.values();
    let ev = eps.values();
    let h1 = hilbert_real(v, v.modulus_sq());
    let h2 = hilbert_real(v, vv.iter().zip(ev.iter()).map(|(a, b)| (a.conj() * b).re).collect());
    let d = derivative_line(eps);
    let dv = d.values();
    eps.with_values(
        (0..vv.len())
            .map(|j| dv[j] + 0.5 * h1[j] * ev[j] + vv[j] * h2[j])
            .collect(),
    )
}

/// Grid adjoint of [`linearized`]: -∂ₓε + ½ℋ(|v|²)ε - vℋ(Re(v̄ε)), with the
/// derivative replaced by the exact adjoint of the line derivative.
pub fn adjoint(v: &Field, eps: &Field) -> Field {
    let vv = v.values();
    let ev = eps.values();
    let h1 = hilbert_real(v, v.modulus_sq());
    let h2 = hilbert_real(v, vv.iter().zip(ev.iter()).map(|(a, b)| (a.conj() * b).re).collect());
    let d = derivative_line_adjoint(eps);
    let dv = d.values();
    eps.with_values(
        (0..vv.len())
            .map(|j| dv[j] + 0.5 * h1[j] * ev[j] - vv[j] * h2[j])
            .collect(),
    )
}

/// N_v(ε) = εℋ(Re(v̄ε)) + ½(v+ε)ℋ(|ε|²).
pub fn nonlinear_part(v: &Field, eps: &Field) -> Field {
    let vv = v.values();
    let ev = eps.values();
    let h2 = hilbert_real(v, vv.iter().zip(ev.iter()).map(|(a, b)| (a.conj() * b).re).collect());
    let h3 = hilbert_real(v, eps.modulus_sq());
    eps.with_values(
        (0..vv.len())
            .map(|j| ev[j] * h2[j] + 0.5 * (vv[j] + ev[j]) * h3[j])
            .collect(),
    )
}

pub fn linearized_lq(eps: &Field) -> Field {
    linearized(&ground_state_q(eps.grid()), eps)
}

pub fn adjoint_lq(eps: &Field) -> Field {
    adjoint(&ground_state_q(eps.grid()), eps)
}

pub fn nonlinear_nq(eps: &Field) -> Field {
    nonlinear_part(&ground_state_q(eps.grid()), eps)
}

/// Homogeneous seminorm ‖∂ₓf‖.
pub fn hdot1_seminorm(f: &Field) -> f64 {
    derivative_line(f).norm_l2()
}

fn weighted_mass(f: &Field) -> f64 {
    let g = f.grid();
    let m = f.modulus_sq();
    integrate(&g, &(0..g.n()).map(|j| m[j] / (1.0 + g.x(j).powi(2))).collect::<Vec<_>>())
}

/// ‖f‖²_{Ḣ¹} = ‖∂ₓf‖² + ‖⟨x⟩⁻¹f‖².
pub fn adapted_norm_sq(f: &Field) -> f64 {
    derivative_line(f).norm_l2_sq() + weighted_mass(f)
}

pub fn adapted_norm(f: &Field) -> f64 {
    adapted_norm_sq(f).sqrt()
}

/// ‖f‖²_{Ḣ¹_R} = ‖∂ₓ(χ_R f)‖² + ‖⟨x⟩⁻¹f‖².
pub fn adapted_norm_truncated_sq(f: &Field, radius: f64) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CmError::InvalidArgument(format!("R = {radius} must be positive")));
    }
    let c = chi_values(&f.grid(), radius, 0.0);
    Ok(derivative_line(&f.mul_real(&c)).norm_l2_sq() + weighted_mass(f))
}

pub fn adapted_norm_truncated(f: &Field, radius: f64) -> Result<f64> {
    adapted_norm_truncated_sq(f, radius).map(f64::sqrt)
}

/// Remove the components along 𝒵₁, 𝒵₂, 𝒵₃ (mutually orthogonal).
pub fn project_out_kernels(f: &Field) -> Field {
    let mut out = f.clone();
    for z in truncated_kernels(f.grid()) {
        let c = inner_r(&out, &z) / inner_r(&z, &z);
        out = out.sub(&z.scale_real(c)).expect("same grid");
    }
    out
}

/// Localized smooth random field: a few complex Gaussian bumps.
pub fn random_bump_field(grid: Grid1D, rng: &mut impl Rng, spread: f64) -> Field {
    let bumps: Vec<(f64, f64, Complex64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-spread..spread),
                rng.gen_range(0.3..2.0),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    Field::from_fn(grid, GaugeTag::Gauged, |x| {
        bumps
            .iter()
            .map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
            .sum()
    })
}

#[derive(Clone, Debug)]
pub struct CoercivityStats {
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// ‖L_Q k‖/‖k‖_{Ḣ¹} for k = iQ, ΛQ, ∂ₓQ.
    pub kernel_ratios: [f64; 3],
}

/// Ratio ‖L_Q v‖/‖v‖_{Ḣ¹} over random smooth v orthogonal to 𝒵₁, 𝒵₂, 𝒵₃.
pub fn coercivity_probe(grid: Grid1D, sample_count: usize, seed: u64) -> CoercivityStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    for _ in 0..sample_count {
        let v = project_out_kernels(&random_bump_field(grid, &mut rng, 3.0));
        let r = linearized_lq(&v).norm_l2() / adapted_norm(&v);
        min = min.min(r);
        max = max.max(r);
        sum += r;
    }
    let (iq, lq, dq) = kernel_elements(grid);
    let kr = |k: &Field| linearized_lq(k).norm_l2() / adapted_norm(k);
    CoercivityStats {
        samples: sample_count,
        min_ratio: min,
        max_ratio: max,
        mean_ratio: if sample_count > 0 { sum / sample_count as f64 } else { f64::NAN },
        kernel_ratios: [kr(&iq), kr(&lq), kr(&dq)],
    }
}

/// V₁ = ∫x²|v|², V₂ = ∫x·Im(v̄∂ₓv).
pub fn virial(v: &Field) -> VirialPair {
    let g = v.grid();
    let m = v.modulus_sq();
    let d = derivative_line(v);
    let vv = v.values();
    let dv = d.values();
    let x = g.xs();
    VirialPair {
        v1: integrate(&g, &(0..g.n()).map(|j| x[j] * x[j] * m[j]).collect::<Vec<_>>()),
        v2: integrate(
            &g,
            &(0..g.n()).map(|j| x[j] * (vv[j].conj() * dv[j]).im).collect::<Vec<_>>(),
        ),
    }
}

#[derive(Clone, Debug)]
pub struct VirialRateReport {
    pub times: Vec<f64>,
    /// Centered difference of V₁ against 4V₂ at each interior snapshot.
    pub dv1_dt: Vec<f64>,
    pub four_v2: Vec<f64>,
    /// Centered difference of V₂ against 4E(v₀).
    pub dv2_dt: Vec<f64>,
    pub four_e0: f64,
    pub max_rel_err_v1: f64,
    pub max_rel_err_v2: f64,
}

fn centered_difference(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Compares dV₁/dt with 4V₂ and dV₂/dt with 4E(v₀) along a trajectory.
pub fn virial_rate_check(traj: &Trajectory) -> Result<VirialRateReport> {
    let s = &traj.snapshots;
    if s.len() < 3 {
        return Err(CmError::TooFewSnapshots { needed: 3, got: s.len() });
    }
    let four_e0 = 4.0 * s[0].conserved.energy;
    let mut rep = VirialRateReport {
        times: Vec::new(),
        dv1_dt: Vec::new(),
        four_v2: Vec::new(),
        dv2_dt: Vec::new(),
        four_e0,
        max_rel_err_v1: 0.0,
        max_rel_err_v2: 0.0,
    };
    for k in 1..s.len() - 1 {
        let t = [s[k - 1].t, s[k].t, s[k + 1].t];
        rep.times.push(t[1]);
        rep.dv1_dt.push(centered_difference(
            t,
            [s[k - 1].virial.v1, s[k].virial.v1, s[k + 1].virial.v1],
        ));
        rep.four_v2.push(4.0 * s[k].virial.v2);
        rep.dv2_dt.push(centered_difference(
            t,
            [s[k - 1].virial.v2, s[k].virial.v2, s[k + 1].virial.v2],
        ));
    }
    let scale1 = rep.four_v2.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tiny = 1e-300;
    rep.max_rel_err_v1 = rep
        .dv1_dt
        .iter()
        .zip(&rep.four_v2)
        .map(|(a, b)| (a - b).abs() / scale1.max(tiny))
        .fold(0.0, f64::max);
    rep.max_rel_err_v2 = rep
        .dv2_dt
        .iter()
        .map(|a| (a - four_e0).abs() / four_e0.abs().max(tiny))
        .fold(0.0, f64::max);
    Ok(rep)
}

#[derive(Clone, Copy, Debug)]
pub struct LocalMassRate {
    /// ∂ₜ∫ψ|v|² = -2Re∫ψ'(i v̄ ∂ₓv).
    pub rate: f64,
    /// Re∫ψ'(i v̄ ∂ₓv), the quantity the energy bound controls.
    pub flux: f64,
    /// √(2E)·‖ψ'v‖.
    pub bound: f64,
    pub holds: bool,
}

/// Instantaneous localized mass rate of a gauged state under weight ψ.
pub fn local_mass_rate(v: &Field, psi: &[f64]) -> Result<LocalMassRate> {
    let g = v.grid();
    if psi.len() != g.n() {
        return Err(CmError::InvalidArgument("weight length differs from grid".into()));
    }
    if psi.iter().any(|p| !p.is_finite()) {
        return Err(CmError::InvalidArgument("weight must be finite".into()));
    }
    let dpsi = real_parts(&derivative_line(&real_field(v, psi.to_vec())));
    let vv = v.values();
    let d = derivative_line(v);
    let dv = d.values();
    let flux = integrate(
        &g,
        &(0..g.n()).map(|j| dpsi[j] * (I * vv[j].conj() * dv[j]).re).collect::<Vec<_>>(),
    );
    let bound = (2.0 * energy(v, GaugeTag::Gauged)).sqrt() * v.mul_real(&dpsi).norm_l2();
    Ok(LocalMassRate {
        rate: -2.0 * flux,
        flux,
        bound,
        holds: flux.abs() <= bound * (1.0 + 1e-9) + 1e-300,
    })
}

#[derive(Clone, Debug)]
pub struct LaxSpectrum {
    pub eigenvalues: Vec<f64>,
    pub hermiticity_defect: f64,
}

/// Eigenvalues of -i∂ₓ - uΠ₊ū on the first `m` nonnegative Fourier modes.
pub fn lax_spectrum(u: &Field, m: usize) -> Result<LaxSpectrum> {
    let g = u.grid();
    let n = g.n();
    if m == 0 || m > n / 4 {
        return Err(CmError::InvalidArgument(format!(
            "mode count {m} must lie in 1..={}",
            n / 4
        )));
    }
    // c_q = (1/2L)∫u e^{-iξ_q x}; the grid starts at -L, hence (-1)^q.
    let raw = fft::forward(&u.values());
    let coef = |q: i64| -> Complex64 {
        let idx = q.rem_euclid(n as i64) as usize;
        let s = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        raw[idx] * (s / n as f64)
    };
    let p = n / 2;
    let b = DMatrix::from_fn(m, p, |j, k| coef(j as i64 - k as i64));
    let mut a = -(&b * b.adjoint());
    for j in 0..m {
        a[(j, j)] += Complex64::new(PI * j as f64 / g.half_width(), 0.0);
    }
    let defect = (&a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sym = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(LaxSpectrum {
        eigenvalues: ev,
        hermiticity_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ground_state_r, lambda_q_profile, q_prime_profile};
    use proptest::prelude::*;

    fn gauss(grid: Grid1D) -> Field {
        Field::from_fn(grid, GaugeTag::Gauged, |x| {
            Complex64::new((-x * x / 2.0).exp(), 0.4 * x * (-x * x / 3.0).exp())
        })
    }

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        (0..m).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn ground_state_mass_and_energy() {
        let mut e_prev = f64::INFINITY;
        for (n, l) in [(8192, 100.0), (16384, 200.0)] {
            let g = Grid1D::new(n, l).unwrap();
            let q = ground_state_q(g);
            assert!((mass(&q) - 2.0 * PI).abs() <= 4.0 / l + 1e-10);
            let e = energy(&q, GaugeTag::Gauged);
            assert!(e < 1e-5 && e < e_prev);
            e_prev = e;
            let er = energy(&ground_state_r(g), GaugeTag::Ungauged);
            assert!(er < 1e-5, "{er}");
        }
    }

    #[test]
    fn q_hdot1_norm_matches_quadrature() {
        let want = quad(|y| 2.0 * y * y / (1.0 + y * y).powi(3), -2000.0, 2000.0, 4_000_000);
        assert!((want - PI / 4.0).abs() < 1e-9);
        assert!((Q_HDOT1_NORM - (PI / 4.0).sqrt()).abs() < 1e-15);
        let g = Grid1D::new(16384, 200.0).unwrap();
        let q = ground_state_q(g);
        assert!((hdot1_seminorm(&q).powi(2) - PI / 4.0).abs() < 1e-5);
        // ⟨x⟩⁻¹Q = Q²/√2, so the weighted term is ∫Q⁴/2 = π
        let w = weighted_mass(&q);
        let want_w = quad(|y| 2.0 / (1.0 + y * y).powi(2), -200.0, 200.0, 400_000);
        assert!((w - want_w).abs() < 1e-8);
        assert!((adapted_norm_sq(&q) - (PI / 4.0 + want_w)).abs() < 1e-5);
    }

    #[test]
    fn energy_is_phase_invariant_and_a_square() {
        let g = Grid1D::new(1024, 20.0).unwrap();
        let v = gauss(g);
        let e = energy(&v, GaugeTag::Gauged);
        let r = v.scale(Complex64::from_polar(1.0, 1.234));
        assert!((energy(&r, GaugeTag::Gauged) - e).abs() < 1e-12 * e.max(1.0));
        assert_eq!(e, 0.5 * bogomolnyi(&v).norm_l2_sq());
        assert!(bogomolnyi(&Field::zeros(g, GaugeTag::Gauged)).max_abs() == 0.0);
    }

    #[test]
    fn bogomolnyi_vanishes_at_q() {
        let g = Grid1D::new(8192, 100.0).unwrap();
        let w: Vec<f64> = g.xs().iter().map(|x| if x.abs() < 10.0 { 1.0 } else { 0.0 }).collect();
        assert!(bogomolnyi(&ground_state_q(g)).mul_real(&w).max_abs() < 1e-3);
    }

    #[test]
    fn linearization_identity_is_exact() {
        let g = Grid1D::new(4096, 80.0).unwrap();
        let q = ground_state_q(g);
        let eps = gauss(g).scale_real(0.2);
        let lhs = bogomolnyi(&q.add(&eps).unwrap()).sub(&bogomolnyi(&q)).unwrap();
        let rhs = linearized_lq(&eps).add(&nonlinear_nq(&eps)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn linearized_matches_gateaux_derivative() {
        let g = Grid1D::new(4096, 80.0).unwrap();
        let q = ground_state_q(g);
        let eps = gauss(g);
        let lq = linearized_lq(&eps);
        let mut errs = Vec::new();
        for h in [1e-3, 1e-4] {
            let p = bogomolnyi(&q.add(&eps.scale_real(h)).unwrap());
            let m = bogomolnyi(&q.sub(&eps.scale_real(h)).unwrap());
            let fd = p.sub(&m).unwrap().scale_real(0.5 / h);
            errs.push(fd.l2_distance(&lq));
        }
        let ratio = errs[0] / errs[1];
        assert!(errs[0] < 1e-5 && (ratio - 100.0).abs() < 20.0, "{errs:?}");
    }

    #[test]
    fn kernel_is_annihilated() {
        let g = Grid1D::new(65536, 800.0).unwrap();
        let (iq, lq, dq) = kernel_elements(g);
        for k in [&iq, &lq, &dq] {
            let r = linearized_lq(k).norm_l2() / adapted_norm(k);
            assert!(r < 1e-4, "{r}");
        }
        let d = Field::from_real_fn(g, GaugeTag::Gauged, q_prime_profile);
        assert!(d.max_abs_diff(&dq) == 0.0);
        assert!((lambda_q_profile(0.0) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coercivity_probe_is_bounded_and_homogeneous() {
        let g = Grid1D::new(4096, 60.0).unwrap();
        let s = coercivity_probe(g, 20, 7);
        assert!(s.min_ratio > 0.05 && s.max_ratio < 10.0, "{s:?}");
        assert!(s.kernel_ratios.iter().all(|&r| r < 1e-2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = project_out_kernels(&random_bump_field(g, &mut rng, 3.0));
        let r1 = linearized_lq(&v).norm_l2() / adapted_norm(&v);
        let v2 = v.scale_real(2.0);
        let r2 = linearized_lq(&v2).norm_l2() / adapted_norm(&v2);
        assert!((r1 - r2).abs() < 1e-12 * r1);
        for z in truncated_kernels(g) {
            assert!(inner_r(&v, &z).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_norm_limits() {
        let g = Grid1D::new(1024, 20.0).unwrap();
        assert_eq!(adapted_norm(&Field::zeros(g, GaugeTag::Gauged)), 0.0);
        let v = gauss(g);
        let a = adapted_norm(&v);
        let b = adapted_norm_truncated(&v, 50.0).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
        assert!(adapted_norm_truncated(&v, 0.0).is_err());
    }

    #[test]
    fn local_mass_rate_cases() {
        let g = Grid1D::new(4096, 60.0).unwrap();
        let v = gauss(g);
        let flat = vec![3.0; g.n()];
        let r = local_mass_rate(&v, &flat).unwrap();
        assert!(r.rate.abs() < 1e-14 && r.holds);
        let q = ground_state_q(g);
        let psi = chi_values(&g, 2.0, 0.5);
        let rq = local_mass_rate(&q, &psi).unwrap();
        assert!(rq.rate.abs() < 1e-10 && rq.holds);
        let rv = local_mass_rate(&v.map_indexed(|x, z| z * Complex64::from_polar(1.0, 0.7 * x)), &psi).unwrap();
        assert!(rv.holds && rv.rate.abs() > 0.0);
    }

    #[test]
    fn lax_spectrum_of_zero_is_the_ladder() {
        let g = Grid1D::new(256, 10.0).unwrap();
        let s = lax_spectrum(&Field::zeros(g, GaugeTag::Ungauged), 32).unwrap();
        for (j, e) in s.eigenvalues.iter().enumerate() {
            assert!((e - PI * j as f64 / 10.0).abs() < 1e-12);
        }
        assert!(lax_spectrum(&Field::zeros(g, GaugeTag::Ungauged), 65).is_err());
        let u = gauss(g).with_tag(GaugeTag::Ungauged);
        assert!(lax_spectrum(&u, 32).unwrap().hermiticity_defect < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn adjoint_pairing(seed in 0u64..1000) {
            let g = Grid1D::new(2048, 50.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_bump_field(g, &mut rng, 4.0);
            let h = random_bump_field(g, &mut rng, 4.0);
            let a = inner_r(&linearized_lq(&f), &h);
            let b = inner_r(&f, &adjoint_lq(&h));
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn quadratic_form_factorizes(seed in 0u64..1000) {
            let g = Grid1D::new(2048, 50.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = project_out_kernels(&random_bump_field(g, &mut rng, 3.0));
            let le = linearized_lq(&e);
            let a = inner_r(&adjoint_lq(&le), &e);
            let b = le.norm_l2_sq();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }

        #[test]
        fn energies_are_nonnegative(seed in 0u64..1000) {
            let g = Grid1D::new(1024, 30.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_bump_field(g, &mut rng, 5.0);
            prop_assert!(energy(&f, GaugeTag::Gauged) >= 0.0);
            prop_assert!(energy(&f, GaugeTag::Ungauged) >= 0.0);
            prop_assert!(mass(&f) >= 0.0);
            prop_assert!(virial(&f).v1 >= 0.0);
        }
    }
}
