//! Modulation fit, energy-bubbling diagnostics, iterative multi-bubble
//! extraction, and the gauged-to-ungauged phase bookkeeping.
//!
//! Extraction runs in the absolute frame: with `e = w - [Q]_g`, the
//! rescaled error `ε̃ = [e]_g⁻¹` never has to be resampled, because
//! `‖∂ε̃‖² = λ²‖∂e‖²`, `‖⟨y⟩⁻¹ε̃‖² = ∫|e|²/(1+((x-x₀)/λ)²)` and
//! `E(φ_R ε̃) = λ² E(φ_R((·-x₀)/λ) e)`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{CmError, Result};
use crate::evolution::Trajectory;
use crate::field::{integrate, Field, GaugeTag};
use crate::functionals::{adapted_norm_truncated_sq, energy, hdot1_seminorm, mass, Q_HDOT1_NORM};
use crate::grid::Grid1D;
use crate::interp::Interpolator;
use crate::spectral::{chi, chi_values, derivative_line};
use crate::states::{
    canonical_phase, cumulative_mass, gauge, gauge_inverse, lambda_q_profile, modulated_q,
    modulated_r, q_profile, q_prime_profile, relative_params, ModulationParams,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Converged when max |(ε̃, 𝒵_k)_r| ≤ tol·‖v‖.
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-6,
        }
    }
}

/// Why a fit stopped, with the best iterate reached.
#[derive(Clone, Debug, PartialEq)]
pub struct FitFailure {
    pub best: ModulationParams,
    pub residuals: [f64; 3],
    pub iterations: usize,
    pub reason: String,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations; best (λ, γ, x) = ({:.6e}, {:.6}, {:.6e}), residuals [{:.3e}, {:.3e}, {:.3e}]",
            self.reason,
            self.iterations,
            self.best.lambda(),
            self.best.gamma(),
            self.best.x(),
            self.residuals[0],
            self.residuals[1],
            self.residuals[2]
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bubble {
    pub params: ModulationParams,
    /// (ε̃, 𝒵_k)_r at the fitted parameters.
    pub residuals: [f64; 3],
    /// ‖ε̃‖_{Ḣ¹} (adapted norm).
    pub eps_norm: f64,
    /// ‖ε̃‖_{Ḣ¹_R}.
    pub eps_norm_truncated: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub bubble: Bubble,
    /// ε̃ = [v]_g⁻¹ - Q on the field's grid.
    pub eps_tilde: Field,
    /// e = v - [Q]_g, the same error in the absolute frame.
    pub error_abs: Field,
}

/// Samples of 𝒵₁, 𝒵₂, 𝒵₃ on the grid points with |y| < 2.
struct KernelSamples {
    ys: Vec<f64>,
    z: Vec<[Complex64; 3]>,
    dy: f64,
}

impl KernelSamples {
    fn new(grid: &Grid1D) -> Self {
        let mut ys = Vec::new();
        let mut z = Vec::new();
        for j in 0..grid.n() {
            let y = grid.x(j);
            if y.abs() < 2.0 {
                let c = chi(y);
                ys.push(y);
                z.push([
                    Complex64::new(lambda_q_profile(y) * c, 0.0),
                    Complex64::new(0.0, q_profile(y) * c),
                    Complex64::new(q_prime_profile(y) * c, 0.0),
                ]);
            }
        }
        Self { ys, z, dy: grid.dx() }
    }
}

struct Residual<'a> {
    it: Interpolator<'a>,
    k: KernelSamples,
}

impl Residual<'_> {
    /// F(g) = ((ε̃, 𝒵_k)_r)_k, sampling v at λy + x.
    fn eval(&self, lambda: f64, gamma: f64, x: f64) -> [f64; 3] {
        let amp = Complex64::from_polar(lambda.sqrt(), -gamma);
        let mut f = [0.0; 3];
        for (i, &y) in self.k.ys.iter().enumerate() {
            let val = self.it.eval(lambda * y + x).unwrap_or_default();
            let eps = amp * val - q_profile(y);
            for (fk, zk) in f.iter_mut().zip(self.k.z[i].iter()) {
                *fk += eps.re * zk.re + eps.im * zk.im;
            }
        }
        f.map(|v| v * self.k.dy)
    }
}

fn max_abs3(f: &[f64; 3]) -> f64 {
    f.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Initial parameters: λ from the Ḣ¹ ratio, x at the peak modulus (the
/// leftmost on ties), γ the phase there.
pub fn initial_guess(v: &Field) -> Result<ModulationParams> {
    let h = hdot1_seminorm(v);
    if !(h > 0.0) {
        return Err(CmError::InvalidArgument(
            "initial guess needs a field with nonzero Ḣ¹ norm".into(),
        ));
    }
    let (j, z) = peak(v);
    let g = v.grid();
    ModulationParams::new(
        (Q_HDOT1_NORM / h).clamp(g.dx(), g.half_width()),
        z.arg(),
        g.x(j),
    )
}

/// Guess with λ read off the peak amplitude, √2/√λ = max|v|.
pub fn amplitude_guess(v: &Field) -> Result<ModulationParams> {
    let (j, z) = peak(v);
    if !(z.norm() > 0.0) {
        return Err(CmError::InvalidArgument("amplitude guess needs a nonzero field".into()));
    }
    let g = v.grid();
    ModulationParams::new(
        (2.0 / z.norm_sqr()).clamp(g.dx(), g.half_width()),
        z.arg(),
        g.x(j),
    )
}

fn peak(v: &Field) -> (usize, Complex64) {
    let vals = v.values();
    let mut best = 0usize;
    for (j, z) in vals.iter().enumerate() {
        if z.norm() > vals[best].norm() {
            best = j;
        }
    }
    (best, vals[best])
}

/// Damped Newton solve of (ε̃, 𝒵_k)_r = 0 in (log λ, γ, x/λ) coordinates.
pub fn fit_modulation(
    v: &Field,
    g0: &ModulationParams,
    opts: &FitOptions,
) -> std::result::Result<FitOutcome, FitFailure> {
    let grid = v.grid();
    let vals = v.values();
    let res = Residual {
        it: Interpolator::new(grid, &vals),
        k: KernelSamples::new(&grid),
    };
    let scale = v.norm_l2();
    let target = opts.tol * scale;
    let (lmin, lmax) = (grid.dx(), grid.half_width());
    let mut p = [g0.lambda().ln(), g0.gamma(), g0.x()];
    let eval = |p: &[f64; 3]| res.eval(p[0].exp(), p[1], p[2]);
    let mut f = eval(&p);
    let mut best = (p, f);
    let params = |p: &[f64; 3]| ModulationParams::new(p[0].exp(), p[1], p[2]);
    let fail = |p: [f64; 3], f: [f64; 3], it: usize, reason: &str| FitFailure {
        best: params(&p).unwrap_or(*g0),
        residuals: f,
        iterations: it,
        reason: reason.to_string(),
    };
    let mut converged_at = None;
    let mut it = 0;
    while it < opts.max_iter {
        if max_abs3(&f) <= target {
            converged_at = Some(it);
            break;
        }
        it += 1;
        let delta = match newton_direction(&eval, &p, &f, opts.fd_step) {
            Some(d) => d,
            None => return Err(fail(best.0, best.1, it, "singular Jacobian")),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = trial_point(&p, &delta, alpha);
            let lam = trial[0].exp();
            if lam < lmin || lam > lmax {
                alpha *= 0.5;
                continue;
            }
            let ft = eval(&trial);
            if max_abs3(&ft) < max_abs3(&f) {
                p = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            let lam = trial_point(&p, &delta, 1.0)[0].exp();
            let reason = if lam < lmin || lam > lmax {
                "scale left the resolvable range"
            } else {
                "line search stalled"
            };
            return Err(fail(best.0, best.1, it, reason));
        }
        if max_abs3(&f) < max_abs3(&best.1) {
            best = (p, f);
        }
    }
    let Some(iters) = converged_at else {
        return Err(fail(best.0, best.1, it, "no convergence"));
    };
    // one polishing step, kept only if it helps
    if let Some(delta) = newton_direction(&eval, &p, &f, opts.fd_step) {
        let trial = trial_point(&p, &delta, 1.0);
        let lam = trial[0].exp();
        if lam >= lmin && lam <= lmax {
            let ft = eval(&trial);
            if max_abs3(&ft) <= max_abs3(&f) {
                p = trial;
                f = ft;
            }
        }
    }
    let g = params(&p).map_err(|e| fail(p, f, iters, &e.to_string()))?;
    Ok(finish_fit(v, g, f, iters))
}

fn trial_point(p: &[f64; 3], d: &[f64; 3], alpha: f64) -> [f64; 3] {
    let lam = p[0].exp();
    [p[0] + alpha * d[0], p[1] + alpha * d[1], p[2] + alpha * d[2] * lam]
}

/// Newton step in (log λ, γ, x/λ), each component capped at 1.
fn newton_direction(
    eval: &impl Fn(&[f64; 3]) -> [f64; 3],
    p: &[f64; 3],
    f: &[f64; 3],
    h: f64,
) -> Option<[f64; 3]> {
    let lam = p[0].exp();
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let step = if c == 2 { h * lam } else { h };
        let mut pp = *p;
        let mut pm = *p;
        pp[c] += step;
        pm[c] -= step;
        let fp = eval(&pp);
        let fm = eval(&pm);
        for r in 0..3 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let d = jac.lu().solve(&(-Vector3::new(f[0], f[1], f[2])))?;
    if !d.iter().all(|x| x.is_finite()) {
        return None;
    }
    let m = d.amax();
    let s = if m > 1.0 { 1.0 / m } else { 1.0 };
    Some([d[0] * s, d[1] * s, d[2] * s])
}

fn finish_fit(v: &Field, g: ModulationParams, residuals: [f64; 3], iterations: usize) -> FitOutcome {
    let e = v.sub(&modulated_q(v.grid(), &g)).expect("same grid");
    let (n1, n1r) = frame_norms(&e, &g, f64::INFINITY);
    let eps_tilde = crate::states::demodulate(v, &g)
        .map(|d| d.sub(&crate::states::ground_state_q(v.grid())).expect("same grid"))
        .unwrap_or_else(|_| Field::zeros(v.grid(), GaugeTag::Gauged));
    FitOutcome {
        bubble: Bubble {
            params: g,
            residuals,
            eps_norm: n1,
            eps_norm_truncated: n1r,
            iterations,
        },
        eps_tilde,
        error_abs: e,
    }
}

fn weighted_frame_mass(e: &Field, g: &ModulationParams) -> f64 {
    let grid = e.grid();
    let m = e.modulus_sq();
    let dens: Vec<f64> = (0..grid.n())
        .map(|j| m[j] / (1.0 + ((grid.x(j) - g.x()) / g.lambda()).powi(2)))
        .collect();
    integrate(&grid, &dens)
}

fn frame_cutoff(grid: &Grid1D, g: &ModulationParams, radius: f64) -> Vec<f64> {
    if radius.is_infinite() {
        vec![1.0; grid.n()]
    } else {
        chi_values(grid, radius * g.lambda(), g.x())
    }
}

/// (‖ε̃‖_{Ḣ¹}, ‖ε̃‖_{Ḣ¹_R}) from the absolute-frame error `e`.
fn frame_norms(e: &Field, g: &ModulationParams, radius: f64) -> (f64, f64) {
    let lam2 = g.lambda().powi(2);
    let w = weighted_frame_mass(e, g);
    let full = lam2 * derivative_line(e).norm_l2_sq() + w;
    let cut = frame_cutoff(&e.grid(), g, radius);
    let trunc = lam2 * derivative_line(&e.mul_real(&cut)).norm_l2_sq() + w;
    (full.sqrt(), trunc.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBubbling {
    /// ‖ε̃‖²_{Ḣ¹_R}.
    pub inner_norm_sq: f64,
    /// E(φ_R ε̃).
    pub outer_energy: f64,
    /// ‖Qε̃‖².
    pub q_weighted_sq: f64,
    /// λ²E(v).
    pub denominator: f64,
    /// (‖ε̃‖²_{Ḣ¹_R} + E(φ_R ε̃))/(λ²E(v)); `None` in the degenerate case.
    pub ratio: Option<f64>,
    /// λ²E(v) = 0 with a nonzero numerator (static-solution case).
    pub degenerate: bool,
}

fn bubbling_from_parts(inner: f64, outer: f64, qw: f64, den: f64) -> EnergyBubbling {
    let num = inner + outer;
    let (ratio, degenerate) = if den > 0.0 {
        (Some(num / den), false)
    } else if num == 0.0 {
        (Some(0.0), false)
    } else {
        (None, true)
    };
    EnergyBubbling {
        inner_norm_sq: inner,
        outer_energy: outer,
        q_weighted_sq: qw,
        denominator: den,
        ratio,
        degenerate,
    }
}

/// Energy-bubbling quantities for a rescaled-frame error ε̃ at scale λ.
pub fn energy_bubbling_report(eps_tilde: &Field, lambda: f64, e_v: f64, radius: f64) -> Result<EnergyBubbling> {
    let grid = eps_tilde.grid();
    let inner = adapted_norm_truncated_sq(eps_tilde, radius)?;
    let phi: Vec<f64> = chi_values(&grid, radius, 0.0).iter().map(|c| 1.0 - c).collect();
    let outer = energy(&eps_tilde.mul_real(&phi).with_tag(GaugeTag::Gauged), GaugeTag::Gauged);
    let q2: Vec<f64> = grid.xs().iter().map(|&y| q_profile(y).powi(2)).collect();
    let qw = integrate(&grid, &eps_tilde.modulus_sq().iter().zip(&q2).map(|(a, b)| a * b).collect::<Vec<_>>());
    Ok(bubbling_from_parts(inner, outer, qw, lambda * lambda * e_v))
}

/// The same quantities computed from `e = v - [Q]_g` without resampling.
fn energy_bubbling_absolute(e: &Field, g: &ModulationParams, e_v: f64, radius: f64) -> EnergyBubbling {
    let grid = e.grid();
    let lam2 = g.lambda().powi(2);
    let (_, trunc) = frame_norms(e, g, radius);
    let phi: Vec<f64> = frame_cutoff(&grid, g, radius).iter().map(|c| 1.0 - c).collect();
    let outer = lam2 * energy(&e.mul_real(&phi).with_tag(GaugeTag::Gauged), GaugeTag::Gauged);
    let m = e.modulus_sq();
    let qw = integrate(
        &grid,
        &(0..grid.n())
            .map(|j| q_profile((grid.x(j) - g.x()) / g.lambda()).powi(2) * m[j])
            .collect::<Vec<_>>(),
    );
    bubbling_from_parts(trunc * trunc, outer, qw, lam2 * e_v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractConfig {
    pub radius: f64,
    pub theta: f64,
    pub max_bubbles: usize,
    pub alpha_star: f64,
    /// Separation ratios below this are flagged.
    pub separation_floor: f64,
    /// ‖ε̃‖_{Ḣ¹} above which the amplitude-based guess is also tried.
    pub retry_threshold: f64,
    /// Allowance added to M(v) in the bubble budget ⌊(M + slack)/2π⌋, covering
    /// the soliton tail mass lost to the finite domain.
    pub mass_slack: f64,
    pub fit: FitOptions,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            radius: 20.0,
            theta: 0.1,
            max_bubbles: 8,
            alpha_star: 0.1,
            separation_floor: 10.0,
            retry_threshold: 0.3,
            mass_slack: 0.5,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub level: usize,
    /// M(v) - k·2π.
    pub expected: f64,
    /// ‖ε_k‖².
    pub radiation_mass: f64,
    pub defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separation {
    pub i: usize,
    pub j: usize,
    /// |x_i - x_j|/λ_i.
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub bubbles: Vec<Bubble>,
    /// Parameters of each bubble relative to the previous one.
    pub relative: Vec<ModulationParams>,
    /// ε_N with v = Σ[Q]_{g_j} + ε_N.
    pub radiation: Field,
    /// λ_k/‖φ_R ε̃_k‖_{Ḣ¹} per level.
    pub dichotomy: Vec<f64>,
    pub bubbling: Vec<EnergyBubbling>,
    /// ‖ε_k‖² for k = 0..=N.
    pub level_radiation_mass: Vec<f64>,
    pub ledger: Vec<LedgerEntry>,
    pub separations: Vec<Separation>,
    pub theta: f64,
    pub radius: f64,
    pub mass: f64,
    pub max_allowed: usize,
    pub failure: Option<FitFailure>,
    pub notes: Vec<String>,
}

impl DecompositionReport {
    pub fn count(&self) -> usize {
        self.bubbles.len()
    }

    /// Σ[Q]_{g_j} + ε_N.
    pub fn reconstruction(&self) -> Field {
        let grid = self.radiation.grid();
        let mut acc = self.radiation.clone();
        for b in &self.bubbles {
            acc = acc.add(&modulated_q(grid, &b.params)).expect("same grid");
        }
        acc
    }

    /// λ_k ≤ λ_{k+1}/θ for consecutive bubbles.
    pub fn scales_monotone(&self) -> bool {
        self.bubbles
            .windows(2)
            .all(|w| w[0].params.lambda() <= w[1].params.lambda() / self.theta)
    }
}

fn best_of(
    w: &Field,
    guesses: &[ModulationParams],
    opts: &FitOptions,
    retry_threshold: f64,
) -> std::result::Result<FitOutcome, FitFailure> {
    let mut best: Option<FitOutcome> = None;
    let mut last_err = None;
    for g0 in guesses {
        match fit_modulation(w, g0, opts) {
            Ok(out) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| out.bubble.eps_norm < b.bubble.eps_norm);
                if better {
                    best = Some(out);
                }
                if best.as_ref().is_some_and(|b| b.bubble.eps_norm <= retry_threshold) {
                    break;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one guess"))
}

/// Iterative multi-bubble extraction with cold-started fits.
pub fn extract_bubbles(v: &Field, cfg: &ExtractConfig) -> Result<DecompositionReport> {
    extract_bubbles_warm(v, cfg, &[])
}

/// Extraction where level k starts from `warm[k-1]` when available.
pub fn extract_bubbles_warm(
    v: &Field,
    cfg: &ExtractConfig,
    warm: &[ModulationParams],
) -> Result<DecompositionReport> {
    v.require_tag(GaugeTag::Gauged)?;
    if !(cfg.radius > 0.0 && cfg.theta > 0.0 && cfg.alpha_star > 0.0) {
        return Err(CmError::InvalidArgument(
            "R, θ and α* must be positive".into(),
        ));
    }
    if !(cfg.mass_slack >= 0.0 && cfg.mass_slack < TAU) {
        return Err(CmError::InvalidArgument("mass slack must lie in [0, 2π)".into()));
    }
    let grid = v.grid();
    let m = mass(v);
    let n_max = cfg.max_bubbles.min(((m + cfg.mass_slack) / TAU).floor() as usize);
    let mut rep = DecompositionReport {
        bubbles: Vec::new(),
        relative: Vec::new(),
        radiation: v.clone(),
        dichotomy: Vec::new(),
        bubbling: Vec::new(),
        level_radiation_mass: vec![m],
        ledger: Vec::new(),
        separations: Vec::new(),
        theta: cfg.theta,
        radius: cfg.radius,
        mass: m,
        max_allowed: n_max,
        failure: None,
        notes: Vec::new(),
    };
    if n_max == 0 {
        rep.notes.push("mass below one soliton: no bubble extracted".into());
        rep.ledger = ledger_from(m, &rep.level_radiation_mass);
        return Ok(rep);
    }
    let sqrt_e = energy(v, GaugeTag::Gauged).sqrt();
    let bound = cfg.alpha_star * hdot1_seminorm(v);
    if sqrt_e > bound {
        return Err(CmError::SmallEnergy {
            sqrt_energy: sqrt_e,
            bound,
        });
    }
    let mut w = v.clone();
    let mut prev = ModulationParams::identity();
    let mut inner_sum = Field::zeros(grid, GaugeTag::Gauged);
    let mut e_prev_energy = energy(v, GaugeTag::Gauged);
    for k in 1..=n_max {
        let mut guesses = Vec::new();
        if let Some(g) = warm.get(k - 1) {
            guesses.push(*g);
        }
        if let Ok(g) = initial_guess(&w) {
            guesses.push(g);
        }
        if let Ok(g) = amplitude_guess(&w) {
            guesses.push(g);
        }
        if guesses.is_empty() {
            rep.notes.push(format!("level {k}: no usable initial guess"));
            break;
        }
        let out = match best_of(&w, &guesses, &cfg.fit, cfg.retry_threshold) {
            Ok(o) => o,
            Err(f) => {
                rep.notes.push(format!("level {k}: fit failed, report truncated at {} bubbles", k - 1));
                rep.failure = Some(f);
                break;
            }
        };
        let g = out.bubble.params;
        let e = out.error_abs;
        let (_, trunc) = frame_norms(&e, &g, cfg.radius);
        let mut bubble = out.bubble;
        bubble.eps_norm_truncated = trunc;
        let chi_k = frame_cutoff(&grid, &g, cfg.radius);
        let phi_k: Vec<f64> = chi_k.iter().map(|c| 1.0 - c).collect();
        let w_next = e.mul_real(&phi_k);
        let outer_h = derivative_line(&w_next).norm_l2();
        let ratio = if outer_h > 0.0 { 1.0 / outer_h } else { f64::INFINITY };
        rep.bubbling.push(energy_bubbling_absolute(&e, &g, e_prev_energy, cfg.radius));
        rep.relative.push(relative_params(&prev, &g));
        rep.bubbles.push(bubble);
        rep.dichotomy.push(ratio);
        // ε_k = Σ_{i<k} χ_i e_i + e_k
        let eps_k = inner_sum.add(&e).expect("same grid");
        rep.level_radiation_mass.push(mass(&eps_k));
        rep.radiation = eps_k;
        inner_sum = inner_sum.add(&e.mul_real(&chi_k)).expect("same grid");
        e_prev_energy = energy(&w_next, GaugeTag::Gauged);
        w = w_next;
        prev = g;
        if ratio >= cfg.theta {
            rep.notes.push(format!("level {k}: dichotomy ratio {ratio:.3e} ≥ θ, stop"));
            break;
        }
        if k == n_max {
            rep.notes.push(format!("level {k}: bubble budget {n_max} reached"));
        }
    }
    rep.radiation = rep.radiation.clone().with_tag(GaugeTag::Gauged);
    rep.ledger = ledger_from(m, &rep.level_radiation_mass);
    rep.separations = separation_table(&rep, cfg.separation_floor);
    Ok(rep)
}

fn ledger_from(m: f64, levels: &[f64]) -> Vec<LedgerEntry> {
    levels
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let expected = m - k as f64 * TAU;
            LedgerEntry {
                level: k,
                expected,
                radiation_mass: r,
                defect: expected - r,
            }
        })
        .collect()
}

/// Per-level decoupling M(v) - k·2π against ‖ε_k‖².
pub fn mass_ledger(v: &Field, report: &DecompositionReport) -> Vec<LedgerEntry> {
    ledger_from(mass(v), &report.level_radiation_mass)
}

/// |x_i - x_j|/λ_i over ordered pairs, flagging ratios below `floor`.
pub fn separation_table(report: &DecompositionReport, floor: f64) -> Vec<Separation> {
    let b = &report.bubbles;
    let mut out = Vec::new();
    for i in 0..b.len() {
        for j in 0..b.len() {
            if i != j {
                let ratio = (b[i].params.x() - b[j].params.x()).abs() / b[i].params.lambda();
                out.push(Separation {
                    i,
                    j,
                    ratio,
                    flagged: ratio < floor,
                });
            }
        }
    }
    out
}

/// Separation table of a report; empty below two bubbles.
pub fn bubble_tree_check(report: &DecompositionReport, floor: f64) -> Vec<Separation> {
    separation_table(report, floor)
}

#[derive(Clone, Debug)]
pub struct TrackRow {
    pub t: f64,
    pub report: std::result::Result<DecompositionReport, String>,
}

#[derive(Clone, Debug)]
pub struct TrackingReport {
    pub rows: Vec<TrackRow>,
    /// dλ_N/dt from a least-squares line through the last bubble's scale.
    pub lambda_slope: f64,
    /// Time at which that line reaches λ = 0.
    pub t_est: f64,
}

/// Decomposes every snapshot, warm-starting each from the previous one.
/// Ungauged snapshots are mapped to the gauged side by -𝒢 first.
pub fn track_modulation(traj: &Trajectory, cfg: &ExtractConfig) -> Result<TrackingReport> {
    let mut rows = Vec::new();
    let mut warm: Vec<ModulationParams> = Vec::new();
    for s in &traj.snapshots {
        let v = match s.field.tag() {
            GaugeTag::Gauged => s.field.clone(),
            GaugeTag::Ungauged => gauge(&s.field)?.scale_real(-1.0),
        };
        let r = extract_bubbles_warm(&v, cfg, &warm);
        if let Ok(rep) = &r {
            if !rep.bubbles.is_empty() {
                warm = rep.bubbles.iter().map(|b| b.params).collect();
            }
        }
        rows.push(TrackRow {
            t: s.t,
            report: r.map_err(|e| e.to_string()),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.report
                .as_ref()
                .ok()
                .and_then(|rep| rep.bubbles.last().map(|b| (r.t, b.params.lambda())))
        })
        .collect();
    let (slope, intercept) = least_squares(&pts);
    Ok(TrackingReport {
        rows,
        lambda_slope: slope,
        t_est: if slope != 0.0 { -intercept / slope } else { f64::NAN },
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mt)
}

#[derive(Clone, Debug)]
pub struct UngaugedSoliton {
    pub params: ModulationParams,
    /// ½∫_{-L}^{x_j}|ε_N|².
    pub radiation_phase: f64,
    /// Σ_ℓ θ_{ℓ,j}, each θ ∈ {0, π}.
    pub pair_phase: f64,
}

#[derive(Clone, Debug)]
pub struct UngaugedReport {
    pub solitons: Vec<UngaugedSoliton>,
    /// -𝒢⁻¹(ε_N) with the sign flips from the bubbles to its left.
    pub radiation: Field,
}

impl UngaugedReport {
    pub fn reconstruction(&self) -> Field {
        let grid = self.radiation.grid();
        let mut acc = self.radiation.clone();
        for s in &self.solitons {
            acc = acc.add(&modulated_r(grid, &s.params)).expect("same grid");
        }
        acc
    }
}

/// Maps each gauged bubble [Q]_{g_j} to [𝓡]_{λ_j, γ_j + γ*_j + Σθ, x_j}.
pub fn ungauge_bubble_list(report: &DecompositionReport) -> Result<UngaugedReport> {
    let eps = &report.radiation;
    eps.require_tag(GaugeTag::Gauged)?;
    let grid = eps.grid();
    let cum = cumulative_mass(eps);
    let at = |x: f64| -> f64 {
        let s = (x + grid.half_width()) / grid.dx();
        if s <= 0.0 {
            return 0.0;
        }
        let j = s.floor() as usize;
        if j + 1 >= cum.len() {
            return *cum.last().expect("non-empty grid");
        }
        let f = s - j as f64;
        cum[j] * (1.0 - f) + cum[j + 1] * f
    };
    let b = &report.bubbles;
    let left_of = |l: usize, j: usize| -> bool {
        let (xl, xj) = (b[l].params.x(), b[j].params.x());
        xl < xj || (xl == xj && l < j)
    };
    let mut solitons = Vec::new();
    for j in 0..b.len() {
        let rad = 0.5 * at(b[j].params.x());
        let pair = (0..b.len()).filter(|&l| l != j && left_of(l, j)).count() as f64 * PI;
        let p = b[j].params;
        solitons.push(UngaugedSoliton {
            params: ModulationParams::new(p.lambda(), canonical_phase(p.gamma() + rad + pair), p.x())?,
            radiation_phase: rad,
            pair_phase: pair,
        });
    }
    let base = gauge_inverse(eps)?.scale_real(-1.0);
    let radiation = base.map_indexed(|x, z| {
        let flips = b
            .iter()
            .enumerate()
            .filter(|(_, bb)| x >= bb.params.x())
            .count();
        if flips % 2 == 1 {
            -z
        } else {
            z
        }
    });
    Ok(UngaugedReport { solitons, radiation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::ground_state_q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid1D {
        Grid1D::new(8192, 100.0).unwrap()
    }

    fn smooth_w(grid: Grid1D, amp: f64, c: f64) -> Field {
        Field::from_fn(grid, GaugeTag::Gauged, |x| {
            Complex64::new(amp * (-(x - c).powi(2) / 2.0).exp(), 0.5 * amp * (x - c) * (-(x - c).powi(2) / 3.0).exp())
        })
    }

    #[test]
    fn recovers_exact_soliton() {
        let g = grid();
        let p = ModulationParams::new(1.3, 2.0, -4.0).unwrap();
        let v = modulated_q(g, &p);
        let guess = ModulationParams::new(1.4, 2.1, -3.9).unwrap();
        let out = fit_modulation(&v, &guess, &FitOptions::default()).unwrap();
        let q = out.bubble.params;
        assert!((q.lambda() - 1.3).abs() < 1e-9 * 1.3);
        assert!(crate::states::phase_distance(q.gamma(), 2.0) < 1e-9);
        assert!((q.x() + 4.0).abs() < 1e-9 * 1.3);
        assert!(out.bubble.eps_norm < 1e-9, "{}", out.bubble.eps_norm);
        assert!(max_abs3(&out.bubble.residuals) <= 1e-10 * v.norm_l2());
    }

    #[test]
    fn perturbed_soliton_converges_and_refit_is_idempotent() {
        let g = grid();
        let p = ModulationParams::new(0.9, 0.4, 1.0).unwrap();
        let v = crate::states::modulate(&ground_state_q(g).add(&smooth_w(g, 0.05, 0.3)).unwrap(), &p).unwrap();
        let out = fit_modulation(&v, &initial_guess(&v).unwrap(), &FitOptions::default()).unwrap();
        assert!(max_abs3(&out.bubble.residuals) <= 1e-10 * v.norm_l2());
        let again = fit_modulation(&v, &out.bubble.params, &FitOptions::default()).unwrap();
        let (a, b) = (out.bubble.params, again.bubble.params);
        assert!((a.lambda() - b.lambda()).abs() < 1e-9);
        assert!((a.x() - b.x()).abs() < 1e-9);
        assert!(crate::states::phase_distance(a.gamma(), b.gamma()) < 1e-9);
    }

    #[test]
    fn initial_guess_cases() {
        let g = grid();
        let v = modulated_q(g, &ModulationParams::new(2.0, 0.0, 0.0).unwrap());
        let p = initial_guess(&v).unwrap();
        assert!((p.lambda() - 2.0).abs() < 0.01);
        let v = modulated_q(g, &ModulationParams::new(1.0, PI / 2.0, 3.0).unwrap());
        let p = initial_guess(&v).unwrap();
        assert!((p.x() - 3.0).abs() < g.dx());
        assert!((p.gamma() - PI / 2.0).abs() < 1e-12);
        assert!(initial_guess(&Field::zeros(g, GaugeTag::Gauged)).is_err());
    }

    #[test]
    fn fit_fails_when_scale_leaves_grid() {
        let g = Grid1D::new(256, 10.0).unwrap();
        let v = smooth_w(g, 1.0, 0.0).scale_real(1e-3);
        let r = fit_modulation(&v, &ModulationParams::new(9.0, 0.0, 0.0).unwrap(), &FitOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn bubbling_report_zero_and_degenerate() {
        let g = grid();
        let z = Field::zeros(g, GaugeTag::Gauged);
        let r = energy_bubbling_report(&z, 1.0, 0.0, 20.0).unwrap();
        assert_eq!(r.inner_norm_sq, 0.0);
        assert_eq!(r.outer_energy, 0.0);
        assert_eq!(r.ratio, Some(0.0));
        let w = smooth_w(g, 0.01, 0.0);
        let r = energy_bubbling_report(&w, 1.0, 0.0, 20.0).unwrap();
        assert!(r.degenerate && r.ratio.is_none());
    }

    #[test]
    fn single_bubble_with_radiation() {
        let g = Grid1D::new(32768, 40.0).unwrap();
        let p = ModulationParams::new(0.01, 0.3, 0.0).unwrap();
        let v = modulated_q(g, &p).add(&smooth_w(g, 0.05, 8.0)).unwrap();
        let rep = extract_bubbles(&v, &ExtractConfig::default()).unwrap();
        assert_eq!(rep.count(), 1, "{:?}", rep.notes);
        let b = rep.bubbles[0].params;
        assert!((b.lambda() - 0.01).abs() < 1e-4);
        assert!(b.x().abs() < 1e-4 && crate::states::phase_distance(b.gamma(), 0.3) < 0.01);
        assert!(rep.reconstruction().max_abs_diff(&v) < 1e-12);
        assert!(bubble_tree_check(&rep, 10.0).is_empty());
    }

    #[test]
    fn pure_radiation_has_only_level_zero() {
        let g = grid();
        let v = smooth_w(g, 0.5, 0.0);
        let rep = extract_bubbles(&v, &ExtractConfig::default()).unwrap();
        assert_eq!(rep.count(), 0);
        assert_eq!(rep.ledger.len(), 1);
        assert_eq!(rep.ledger[0].level, 0);
    }

    #[test]
    fn exact_soliton_ledger_defect_is_truncation_sized() {
        let g = grid();
        let v = modulated_q(g, &ModulationParams::new(1.0, 0.0, 0.0).unwrap());
        let rep = extract_bubbles(&v, &ExtractConfig::default()).unwrap();
        assert_eq!(rep.count(), 1);
        let l = mass_ledger(&v, &rep);
        assert!(l[1].defect.abs() <= 4.0 / 100.0 + 1e-6, "{:?}", l[1]);
    }

    #[test]
    fn large_energy_is_rejected() {
        let g = grid();
        let v = smooth_w(g, 3.0, 0.0).map_indexed(|x, z| z * Complex64::from_polar(1.0, 5.0 * x));
        assert!(matches!(
            extract_bubbles(&v, &ExtractConfig::default()),
            Err(CmError::SmallEnergy { .. })
        ));
    }

    #[test]
    fn overlapping_bubbles_are_flagged() {
        let g = grid();
        let mk = |l: f64, x: f64| Bubble {
            params: ModulationParams::new(l, 0.0, x).unwrap(),
            residuals: [0.0; 3],
            eps_norm: 0.0,
            eps_norm_truncated: 0.0,
            iterations: 0,
        };
        let rep = DecompositionReport {
            bubbles: vec![mk(1.0, 0.0), mk(1.2, 2.0)],
            relative: vec![],
            radiation: Field::zeros(g, GaugeTag::Gauged),
            dichotomy: vec![],
            bubbling: vec![],
            level_radiation_mass: vec![],
            ledger: vec![],
            separations: vec![],
            theta: 0.1,
            radius: 20.0,
            mass: 0.0,
            max_allowed: 2,
            failure: None,
            notes: vec![],
        };
        let t = bubble_tree_check(&rep, 10.0);
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|s| s.flagged));
    }

    #[test]
    fn ungauge_single_bubble_phases() {
        let g = grid();
        let p = ModulationParams::new(1.0, 0.5, 2.0).unwrap();
        let v = modulated_q(g, &p);
        let rep = extract_bubbles(&v, &ExtractConfig::default()).unwrap();
        let u = ungauge_bubble_list(&rep).unwrap();
        assert_eq!(u.solitons.len(), 1);
        assert!(u.solitons[0].radiation_phase.abs() < 1e-12);
        assert_eq!(u.solitons[0].pair_phase, 0.0);
        assert!(crate::states::phase_distance(u.solitons[0].params.gamma(), 0.5) < 1e-8);

        // radiation entirely to the left saturates the running integral
        let rad = smooth_w(g, 0.02, -30.0);
        let v2 = modulated_q(g, &p).add(&rad).unwrap();
        let rep2 = extract_bubbles(&v2, &ExtractConfig::default()).unwrap();
        let u2 = ungauge_bubble_list(&rep2).unwrap();
        let m = mass(&rep2.radiation);
        let left: f64 = {
            let c = cumulative_mass(&rep2.radiation);
            c[((2.0 + 100.0) / g.dx()) as usize]
        };
        assert!((u2.solitons[0].radiation_phase - 0.5 * left).abs() < 1e-3 * m.max(1e-12));
    }

    #[test]
    fn random_fits_recover_parameters() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = ModulationParams::new(rng.gen_range(0.5..3.0), rng.gen_range(0.0..TAU), rng.gen_range(-10.0..10.0)).unwrap();
            let v = modulated_q(g, &p);
            let g0 = ModulationParams::new(p.lambda() * 1.1, p.gamma() + 0.1, p.x() + 0.1 * p.lambda()).unwrap();
            let q = fit_modulation(&v, &g0, &FitOptions::default()).unwrap().bubble.params;
            assert!((q.lambda() - p.lambda()).abs() <= 1e-9 * p.lambda());
            assert!(crate::states::phase_distance(q.gamma(), p.gamma()) <= 1e-9);
            assert!((q.x() - p.x()).abs() <= 1e-9 * p.lambda().max(1.0));
        }
    }

    fn two_bubble(theta: f64) -> (Field, ModulationParams, ModulationParams, ExtractConfig) {
        let g = Grid1D::new(1 << 18, 16.0).unwrap();
        let p1 = ModulationParams::new(1e-3, 0.0, -5.0).unwrap();
        let p2 = ModulationParams::new(0.1, 1.0, 5.0).unwrap();
        let v = modulated_q(g, &p1)
            .add(&modulated_q(g, &p2))
            .unwrap()
            .add(&smooth_w(g, 0.1, 0.0))
            .unwrap();
        let cfg = ExtractConfig {
            theta,
            ..ExtractConfig::default()
        };
        (v, p1, p2, cfg)
    }

    #[test]
    fn two_bubbles_recovered_in_scale_order() {
        let (v, p1, p2, cfg) = two_bubble(0.5);
        let rep = extract_bubbles(&v, &cfg).unwrap();
        assert_eq!(rep.count(), 2, "{:?}", rep.notes);
        assert!(rep.count() <= rep.max_allowed);
        for (b, p) in rep.bubbles.iter().zip([p1, p2]) {
            let q = b.params;
            assert!((q.lambda() / p.lambda() - 1.0).abs() < 0.01);
            assert!(crate::states::phase_distance(q.gamma(), p.gamma()) < 0.01);
            assert!((q.x() - p.x()).abs() < 0.01 * p.lambda());
        }
        assert!(rep.scales_monotone());
        assert!(rep.ledger[2].defect.abs() <= 0.01 * mass(&v));
        let min_sep = rep.separations.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
        assert!(min_sep >= 100.0);
        assert!(rep.reconstruction().max_abs_diff(&v) < 1e-12);
        // relative parameters compose back to the absolute ones
        let g2 = crate::states::compose_params(&rep.bubbles[0].params, &rep.relative[1]);
        assert!((g2.lambda() - rep.bubbles[1].params.lambda()).abs() < 1e-12);
        assert!((g2.x() - rep.bubbles[1].params.x()).abs() < 1e-12);
    }

    #[test]
    fn two_bubble_ratio_above_threshold_stops_after_one() {
        // λ₁/‖φ_R ε̃₁‖ = λ₂/‖Q‖_{Ḣ¹} ≈ 0.113 for this fixture
        let (v, _, _, cfg) = two_bubble(0.1);
        let rep = extract_bubbles(&v, &cfg).unwrap();
        assert_eq!(rep.count(), 1);
        assert!((rep.dichotomy[0] - 0.1 / Q_HDOT1_NORM).abs() < 0.01);
    }

    #[test]
    fn two_bubble_ungauging_pair_phases() {
        let (v, _, _, cfg) = two_bubble(0.5);
        let rep = extract_bubbles(&v, &cfg).unwrap();
        let u = ungauge_bubble_list(&rep).unwrap();
        assert_eq!(u.solitons[0].pair_phase, 0.0);
        assert_eq!(u.solitons[1].pair_phase, PI);
        let direct = gauge_inverse(&rep.reconstruction()).unwrap().scale_real(-1.0);
        let rel = u.reconstruction().l2_distance(&direct) / direct.norm_l2();
        // dominated by the wider bubble's tail beyond the other center, ~2(2λ₂/d)^{1/2}/‖v‖
        let tail = 2.0 * (2.0f64 * 0.1 * (1.0 / 10.0 - 1.0 / 27.0)).sqrt() / v.norm_l2();
        assert!(rel < 1.5 * tail, "{rel} vs {tail}");
    }

    #[test]
    fn bubble_count_never_exceeds_mass_bound() {
        let g = Grid1D::new(4096, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let amp = rng.gen_range(0.2..2.5);
            let v = smooth_w(g, amp, rng.gen_range(-5.0..5.0));
            let cfg = ExtractConfig {
                alpha_star: f64::INFINITY,
                ..ExtractConfig::default()
            };
            let rep = extract_bubbles(&v, &cfg).unwrap();
            let bound = ((mass(&v) + cfg.mass_slack) / TAU).floor() as usize;
            assert!(rep.count() <= bound);
        }
    }

    #[test]
    fn warm_and_cold_start_agree() {
        let g = grid();
        let p = ModulationParams::new(0.7, 2.5, 3.0).unwrap();
        let v = crate::states::modulate(&ground_state_q(g).add(&smooth_w(g, 0.03, -0.5)).unwrap(), &p).unwrap();
        let cfg = ExtractConfig {
            alpha_star: f64::INFINITY,
            ..ExtractConfig::default()
        };
        let cold = extract_bubbles(&v, &cfg).unwrap();
        let warm_g = ModulationParams::new(0.75, 2.4, 3.05).unwrap();
        let warm = extract_bubbles_warm(&v, &cfg, &[warm_g]).unwrap();
        let (a, b) = (cold.bubbles[0].params, warm.bubbles[0].params);
        assert!((a.lambda() - b.lambda()).abs() < 1e-9);
        assert!((a.x() - b.x()).abs() < 1e-9);
        assert!(crate::states::phase_distance(a.gamma(), b.gamma()) < 1e-9);
    }

    #[test]
    fn tracking_static_and_self_similar() {
        use crate::evolution::Snapshot;
        let g = Grid1D::new(4096, 50.0).unwrap();
        let q = ground_state_q(g);
        let tr = Trajectory::from_snapshots((0..4).map(|k| Snapshot::new(0.1 * k as f64, q.clone())).collect());
        let rep = track_modulation(&tr, &ExtractConfig::default()).unwrap();
        for r in &rep.rows {
            let b = r.report.as_ref().unwrap().bubbles[0].params;
            assert!((b.lambda() - 1.0).abs() < 1e-9 && b.x().abs() < 1e-9);
        }
        assert!(rep.lambda_slope.abs() < 1e-9);

        // ungauged S(t) has gauged-side scale t
        let g = Grid1D::new(1 << 14, 25.0).unwrap();
        let snaps = (0..5)
            .map(|k| {
                let t = 0.04 + 0.01 * k as f64;
                Snapshot::new(t, crate::states::explicit_blowup_s(t, g).unwrap())
            })
            .collect();
        let cfg = ExtractConfig {
            alpha_star: f64::INFINITY,
            ..ExtractConfig::default()
        };
        let rep = track_modulation(&Trajectory::from_snapshots(snaps), &cfg).unwrap();
        assert!((rep.lambda_slope - 1.0).abs() < 0.01);
        assert!(rep.t_est.abs() < 1e-3);
    }
}
