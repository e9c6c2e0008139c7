//! Named verification suites: property checks with measured values and
//! tolerances, grouped by module.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{
    energy_bubbling_report, extract_bubbles, fit_modulation, track_modulation, ungauge_bubble_list, ExtractConfig,
    FitOptions,
};
use crate::evolution::{run, step, SimConfig, Snapshot, Trajectory};
use crate::field::{inner_r, integrate, Field, GaugeTag};
use crate::functionals::{
    adapted_norm, adjoint_lq, coercivity_probe, energy, linearized_lq, local_mass_rate, mass,
    project_out_kernels, random_bump_field, virial_rate_check,
};
use crate::grid::Grid1D;
use crate::spectral::{abs_deriv, chi_values, hilbert, szego_minus, szego_project};
use crate::states::{
    explicit_blowup_s, galilean, gauge, gauge_inverse, ground_state_q, ground_state_r, modulated_q,
    phase_distance, pseudo_conformal, ModulationParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Operators,
    States,
    Functionals,
    Evolution,
    Decomposition,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Operators,
        Suite::States,
        Suite::Functionals,
        Suite::Evolution,
        Suite::Decomposition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::States => "states",
            Suite::Functionals => "functionals",
            Suite::Evolution => "evolution",
            Suite::Decomposition => "decomposition",
        }
    }

    /// Suites selected by a name; `all` selects every suite.
    pub fn parse(name: &str) -> Option<Vec<Suite>> {
        if name == "all" {
            return Some(Self::ALL.to_vec());
        }
        Self::ALL.iter().find(|s| s.name() == name).map(|s| vec![*s])
    }

    pub fn names() -> Vec<&'static str> {
        let mut v: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
        v.push("all");
        v
    }
}

/// One verified property: passes when `measured ≤ tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub suite: Suite,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckItem {
    pub fn le(suite: Suite, name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.to_string(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    fn failed(suite: Suite, name: &str, tolerance: f64) -> Self {
        Self {
            suite,
            name: name.to_string(),
            measured: f64::NAN,
            tolerance,
            passed: false,
        }
    }
}

impl fmt::Display for CheckItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}  measured {:.3e}  tolerance {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    /// Run the evolution items with the padded nonlinearity left unscaled.
    #[doc(hidden)]
    pub sabotage_dealiasing: bool,
}

/// Runs the suites on scoped threads; items come back in suite order.
pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> Vec<CheckItem> {
    let mut sorted = suites.to_vec();
    sorted.sort();
    sorted.dedup();
    std::thread::scope(|s| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&suite| s.spawn(move || run_suite(suite, opts)))
            .collect();
        handles
            .into_iter()
            .zip(&sorted)
            .flat_map(|(h, &suite)| {
                h.join()
                    .unwrap_or_else(|_| vec![CheckItem::failed(suite, "suite panicked", 0.0)])
            })
            .collect()
    })
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<CheckItem> {
    match suite {
        Suite::Operators => operators(),
        Suite::States => states(),
        Suite::Functionals => functionals(),
        Suite::Evolution => evolution(opts),
        Suite::Decomposition => decomposition(),
    }
}

fn reference_grid() -> Grid1D {
    Grid1D::new(8192, 100.0).expect("valid grid")
}

fn doubled_grid() -> Grid1D {
    Grid1D::new(16384, 200.0).expect("valid grid")
}

fn gaussian(grid: Grid1D, tag: GaugeTag, amp: f64, width: f64, center: f64, velocity: f64) -> Field {
    Field::from_fn(grid, tag, |x| {
        let s = (x - center) / width;
        Complex64::from_polar(amp * (-0.5 * s * s).exp(), velocity * x)
    })
}

fn re(f: &Field) -> Vec<f64> {
    f.values().iter().map(|z| z.re).collect()
}

fn real(grid: Grid1D, v: &[f64]) -> Field {
    Field::from_samples(grid, GaugeTag::Gauged, v.iter().map(|&a| Complex64::new(a, 0.0)).collect())
        .expect("grid length")
}

fn window_max(grid: Grid1D, err: impl Fn(usize) -> f64, half: f64) -> f64 {
    (0..grid.n())
        .filter(|&j| grid.x(j).abs() <= half)
        .map(err)
        .fold(0.0, f64::max)
}

/// max |ℋ(Q²) − yQ²| and max ||D|(Q²) − 2(1−y²)/(1+y²)²| on |y| ≤ 5. The
/// periodic kernel adds a term growing like x/L², so the window is kept at the
/// soliton scale.
pub fn q2_identity_errors(grid: Grid1D) -> (f64, f64) {
    let q2: Vec<f64> = ground_state_q(grid).modulus_sq();
    let f = real(grid, &q2);
    let h = re(&hilbert(&f));
    let d = re(&abs_deriv(&f));
    let half = 5.0;
    let eh = window_max(grid, |j| (h[j] - grid.x(j) * q2[j]).abs(), half);
    let ed = window_max(
        grid,
        |j| {
            let y = grid.x(j);
            (d[j] - 2.0 * (1.0 - y * y) / (1.0 + y * y).powi(2)).abs()
        },
        half,
    );
    (eh, ed)
}

/// max |fg − (ℋf·ℋg − ℋ(f·ℋg + ℋf·g))| for a Gaussian f and an odd bump g.
/// The periodic transform adds the product of the means, so g has mean zero.
pub fn product_rule_error(grid: Grid1D) -> f64 {
    let f: Vec<f64> = grid.xs().iter().map(|&x| (-(x - 0.7f64).powi(2)).exp()).collect();
    let g: Vec<f64> = grid.xs().iter().map(|&x| (x + 0.4) * (-0.5 * (x + 0.4f64).powi(2)).exp()).collect();
    let hf = re(&hilbert(&real(grid, &f)));
    let hg = re(&hilbert(&real(grid, &g)));
    let inner: Vec<f64> = (0..grid.n()).map(|j| f[j] * hg[j] + hf[j] * g[j]).collect();
    let h_inner = re(&hilbert(&real(grid, &inner)));
    (0..grid.n())
        .map(|j| (f[j] * g[j] - (hf[j] * hg[j] - h_inner[j])).abs())
        .fold(0.0, f64::max)
}

/// Relative error of [x,ℋ]f = (1/π)∫f for a narrow Gaussian on |x| ≤ 0.05,
/// where the periodic kernel's O(x²/L²) correction is negligible.
pub fn commutator_error(grid: Grid1D) -> f64 {
    let w = 0.07;
    let f: Vec<f64> = grid.xs().iter().map(|&x| (-0.5 * (x / w).powi(2)).exp()).collect();
    let exact = w * (2.0 * PI).sqrt() / PI;
    let hf = re(&hilbert(&real(grid, &f)));
    let xf: Vec<f64> = (0..grid.n()).map(|j| grid.x(j) * f[j]).collect();
    let hxf = re(&hilbert(&real(grid, &xf)));
    window_max(grid, |j| (grid.x(j) * hf[j] - hxf[j] - exact).abs() / exact, 0.05)
}

fn operators() -> Vec<CheckItem> {
    let s = Suite::Operators;
    let g = reference_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_bump_field(g, &mut rng, 20.0);
    let spec = f.clone().to_spectral();
    let plancherel = (spec.norm_l2_sq() - f.norm_l2_sq()).abs() / f.norm_l2_sq();
    let fr = real(g, &re(&f));
    let skew = integrate(&g, &(0..g.n()).map(|j| fr.values()[j].re * re(&hilbert(&fr))[j]).collect::<Vec<_>>()).abs()
        / fr.norm_l2_sq();
    let p = szego_project(&spec);
    let idem = szego_project(&p)
        .raw()
        .iter()
        .zip(p.raw())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let (eh, ed) = q2_identity_errors(g);
    let (eh2, ed2) = q2_identity_errors(doubled_grid());
    vec![
        CheckItem::le(s, "plancherel", plancherel, 1e-12),
        CheckItem::le(s, "hilbert skew", skew, 1e-10),
        CheckItem::le(s, "szego idempotent", idem, 0.0),
        CheckItem::le(s, "H(Q^2) - yQ^2", eh, 1e-3),
        CheckItem::le(s, "H(Q^2) error ratio under L doubling", eh2 / eh, 1.0),
        CheckItem::le(s, "|D|(Q^2) - 2(1-y^2)/(1+y^2)^2", ed, 1e-3),
        CheckItem::le(s, "|D|(Q^2) error ratio under L doubling", ed2 / ed, 1.0),
        CheckItem::le(s, "hilbert product rule", product_rule_error(g), 1e-6),
        CheckItem::le(s, "[x,H] commutator", commutator_error(g), 1e-6),
    ]
}

fn rel_mass_error(f: &Field) -> f64 {
    (mass(f) - TAU).abs() / TAU
}

fn states() -> Vec<CheckItem> {
    let s = Suite::States;
    let (g, g2) = (reference_grid(), doubled_grid());
    let (q, q2) = (ground_state_q(g), ground_state_q(g2));
    let (r, r2) = (ground_state_r(g), ground_state_r(g2));
    let eq = energy(&q, GaugeTag::Gauged);
    let er = energy(&r, GaugeTag::Ungauged);
    let u = gaussian(g, GaugeTag::Ungauged, 1.1, 1.3, 0.5, 0.8);
    let gu = gauge(&u).expect("ungauged input");
    let modulus = u
        .values()
        .iter()
        .zip(gu.values().iter())
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    let back = gauge_inverse(&gu).expect("gauged input").l2_distance(&u) / u.norm_l2();
    let minus_q = gauge(&r).expect("ungauged input").add(&q).expect("same grid").norm_l2() / q.norm_l2();
    let pg = Grid1D::new(4096, 20.0).expect("valid grid");
    let pf = gaussian(pg, GaugeTag::Ungauged, 1.0, 1.0, 0.3, 0.5);
    let (h, tp) = pseudo_conformal(&pf, 0.7).expect("nonzero time");
    let involution = pseudo_conformal(&h, tp).expect("nonzero time").0.max_abs_diff(&pf);
    let gal = galilean(&u, 0.0, 0.37).max_abs_diff(&u);
    let chir = |r: &Field| szego_minus(r).norm_l2() / r.norm_l2();
    vec![
        CheckItem::le(s, "M(Q) relative to 2pi", rel_mass_error(&q), 0.01),
        CheckItem::le(s, "M(Q) error ratio under L doubling", rel_mass_error(&q2) / rel_mass_error(&q), 0.55),
        CheckItem::le(s, "M(R) relative to 2pi", rel_mass_error(&r), 0.01),
        CheckItem::le(s, "M(R) error ratio under L doubling", rel_mass_error(&r2) / rel_mass_error(&r), 0.55),
        CheckItem::le(s, "E(Q)", eq, 1e-5),
        CheckItem::le(s, "E(Q) ratio under L doubling", energy(&q2, GaugeTag::Gauged) / eq, 1.0),
        CheckItem::le(s, "E~(R)", er, 1e-5),
        CheckItem::le(s, "E~(R) ratio under L doubling", energy(&r2, GaugeTag::Ungauged) / er, 1.0),
        CheckItem::le(s, "gauge keeps modulus", modulus, 1e-14),
        CheckItem::le(s, "gauge mass change", (mass(&gu) - mass(&u)).abs() / mass(&u), 1e-14),
        CheckItem::le(s, "gauge round trip", back, 1e-12),
        CheckItem::le(s, "G(R) + Q relative (left tail phase 1/L)", minus_q, 2.0 / g.half_width()),
        CheckItem::le(s, "pseudo-conformal involution", involution, 1e-8),
        CheckItem::le(s, "galilean c = 0 identity", gal, 0.0),
        CheckItem::le(s, "chirality of R ratio under L doubling", chir(&r2) / chir(&r), 1.0),
    ]
}

fn functionals() -> Vec<CheckItem> {
    let s = Suite::Functionals;
    let g = reference_grid();
    let big = Grid1D::new(65536, 800.0).expect("valid grid");
    let stats = coercivity_probe(big, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairing: f64 = 0.0;
    let mut factor: f64 = 0.0;
    let mut min_energy = f64::INFINITY;
    for _ in 0..100 {
        let a = random_bump_field(g, &mut rng, 5.0);
        let b = random_bump_field(g, &mut rng, 5.0);
        let lhs = inner_r(&linearized_lq(&a), &b);
        let rhs = inner_r(&a, &adjoint_lq(&b));
        pairing = pairing.max((lhs - rhs).abs() / (a.norm_l2() * b.norm_l2()));
        let e = project_out_kernels(&a);
        let le = linearized_lq(&e);
        let quad = inner_r(&adjoint_lq(&le), &e);
        factor = factor.max((quad - le.norm_l2_sq()).abs() / le.norm_l2_sq().max(1e-300));
        let tag = if rng.gen_bool(0.5) { GaugeTag::Gauged } else { GaugeTag::Ungauged };
        min_energy = min_energy.min(energy(&a.clone().with_tag(tag), tag));
    }
    let u = gaussian(g, GaugeTag::Ungauged, 1.0, 1.0, 0.0, 0.6);
    let cov = (energy(&gauge(&u).expect("ungauged").scale_real(-1.0), GaugeTag::Gauged)
        - energy(&u, GaugeTag::Ungauged))
    .abs()
        / energy(&u, GaugeTag::Ungauged);
    let v = gaussian(g, GaugeTag::Gauged, 1.2, 1.0, 0.5, 0.7);
    let psi: Vec<f64> = chi_values(&g, 2.0, 0.0);
    let lmr = local_mass_rate(&v, &psi).expect("valid weight");
    let coer = coercivity_probe(g, 20, 9);
    vec![
        CheckItem::le(s, "L_Q(iQ) / |iQ|_H1 at L = 800", stats.kernel_ratios[0], 1e-4),
        CheckItem::le(s, "L_Q(LambdaQ) / |LambdaQ|_H1 at L = 800", stats.kernel_ratios[1], 1e-4),
        CheckItem::le(s, "L_Q(Q') / |Q'|_H1 at L = 800", stats.kernel_ratios[2], 1e-4),
        CheckItem::le(s, "adjoint pairing defect", pairing, 1e-10),
        CheckItem::le(s, "quadratic form factorization defect", factor, 1e-10),
        CheckItem::le(s, "energy nonnegativity (-min E)", (-min_energy).max(0.0), 0.0),
        CheckItem::le(s, "E(-G(u)) vs E~(u) relative", cov, 1e-5),
        CheckItem::le(s, "local mass flux over its bound", lmr.flux.abs() / lmr.bound, 1.0),
        CheckItem::le(s, "coercivity on orthogonal fields (1/min ratio)", 1.0 / coer.min_ratio, 1e3),
    ]
}

fn rel_drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(1e-300)
}

fn evolution(opts: &VerifyOptions) -> Vec<CheckItem> {
    let s = Suite::Evolution;
    let g = reference_grid();
    let mut items = Vec::new();

    let v0 = Field::from_fn(g, GaugeTag::Gauged, |x| {
        Complex64::from_polar(1.2 * (-x * x / 2.0).exp(), 0.3 * x + 0.1 * x * x)
    });
    let mut cfg = SimConfig::new(GaugeTag::Gauged, g);
    cfg.t_end = 0.5;
    cfg.output_every = 0.01;
    cfg.dealias = 3;
    cfg.fault_unscaled_padding = opts.sabotage_dealiasing;
    match run(&cfg, &v0) {
        Ok(tr) => {
            let (a, b) = (tr.snapshots[0].conserved, tr.last().conserved);
            let drift = rel_drift(a.mass, b.mass)
                .max(rel_drift(a.energy, b.energy))
                .max(rel_drift(a.momentum, b.momentum));
            items.push(CheckItem::le(s, "conservation drift (M, E, P) to T = 0.5", drift, 1e-7));
            match virial_rate_check(&tr) {
                Ok(vr) => items.push(CheckItem::le(s, "dV2/dt = 4E(v0) relative", vr.max_rel_err_v2, 0.01)),
                Err(_) => items.push(CheckItem::failed(s, "dV2/dt = 4E(v0) relative", 0.01)),
            }
        }
        Err(_) => items.push(CheckItem::failed(s, "conservation drift (M, E, P) to T = 0.5", 1e-7)),
    }

    let mut cu = SimConfig::new(GaugeTag::Ungauged, g);
    cu.t_end = 0.1;
    cu.output_every = 0.1;
    cu.dealias = 3;
    cu.fault_unscaled_padding = opts.sabotage_dealiasing;
    let mut cv = cu.clone();
    cv.equation = GaugeTag::Gauged;
    let u0 = gaussian(g, GaugeTag::Ungauged, 1.0, 1.0, 0.0, 0.5);
    let gauged0 = gauge(&u0).expect("ungauged").scale_real(-1.0);
    let equiv = match (run(&cu, &u0), run(&cv, &gauged0)) {
        (Ok(tu), Ok(tv)) => gauge(&tu.last().field)
            .expect("ungauged")
            .scale_real(-1.0)
            .l2_distance(&tv.last().field),
        _ => f64::NAN,
    };
    items.push(CheckItem::le(s, "gauge equivariance at t = 0.1", equiv, 1e-4));

    let c0 = szego_project(&gaussian(g, GaugeTag::Ungauged, 1.2, 1.0, 0.0, 2.0));
    let chir = run(&cu, &c0)
        .map(|tr| {
            tr.snapshots
                .iter()
                .map(|sn| szego_minus(&sn.field).norm_l2() / sn.field.norm_l2())
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::NAN);
    items.push(CheckItem::le(s, "chirality |P-u|/|u| over T = 0.1", chir, 1e-4));

    let dt = 1e-4;
    let rev = step(&v0, 0.0, dt, 2)
        .and_then(|f| step(&f, dt, -dt, 2))
        .map(|f| f.l2_distance(&v0) / v0.norm_l2())
        .unwrap_or(f64::NAN);
    items.push(CheckItem::le(s, "time reversal after one step", rev, 1e-10));
    items
}

fn decomposition() -> Vec<CheckItem> {
    let s = Suite::Decomposition;
    let g = reference_grid();
    let opts = FitOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut err_fit, mut err_orth, mut err_refit, mut err_pert) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = ModulationParams::new(
            rng.gen_range(0.3..3.0),
            rng.gen_range(0.0..TAU),
            rng.gen_range(-20.0..20.0),
        )
        .expect("valid parameters");
        let v = modulated_q(g, &p);
        let jitter = |rng: &mut ChaCha8Rng| {
            ModulationParams::new(
                p.lambda() * (1.0 + rng.gen_range(-0.1..0.1)),
                p.gamma() + rng.gen_range(-0.1..0.1),
                p.x() + rng.gen_range(-0.1..0.1) * p.lambda(),
            )
            .expect("valid parameters")
        };
        let g0 = jitter(&mut rng);
        let Ok(out) = fit_modulation(&v, &g0, &opts) else {
            err_fit = f64::INFINITY;
            continue;
        };
        let q = out.bubble.params;
        let scale = p.lambda().max(1.0);
        err_fit = err_fit
            .max((q.lambda() - p.lambda()).abs() / p.lambda())
            .max(phase_distance(q.gamma(), p.gamma()))
            .max((q.x() - p.x()).abs() / scale);
        err_orth = err_orth.max(out.bubble.residuals.iter().fold(0.0f64, |a, r| a.max(r.abs())) / v.norm_l2());
        let dist = |a: &ModulationParams, b: &ModulationParams| {
            ((a.lambda() - b.lambda()).abs() / b.lambda())
                .max(phase_distance(a.gamma(), b.gamma()))
                .max((a.x() - b.x()).abs() / scale)
        };
        match fit_modulation(&v, &q, &opts) {
            Ok(again) => err_refit = err_refit.max(dist(&again.bubble.params, &q)),
            Err(_) => err_refit = f64::INFINITY,
        }
        match fit_modulation(&v, &jitter(&mut rng), &opts) {
            Ok(other) => err_pert = err_pert.max(dist(&other.bubble.params, &q)),
            Err(_) => err_pert = f64::INFINITY,
        }
    }
    let mut items = vec![
        CheckItem::le(s, "exact soliton recovery (50 random g)", err_fit, 1e-9),
        CheckItem::le(s, "orthogonality residual / |v|", err_orth, 1e-10),
        CheckItem::le(s, "idempotent refit", err_refit, 1e-9),
        CheckItem::le(s, "10% perturbed guesses reach the same point", err_pert, 1e-9),
    ];
    items.extend(bubbling_items(g));
    items.extend(two_bubble_items());
    items.extend(tracking_items());
    items
}

/// Ratio (‖ε̃‖²_{Ḣ¹_R} + E(φ_R ε̃))/E(Q + ε̃) over random orthogonal ε̃.
pub fn bubbling_sample(g: Grid1D, count: usize, seed: u64, radius: f64) -> (f64, f64, f64) {
    let q = ground_state_q(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_ratio, mut min_energy, mut worst_halving) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..count {
        let raw = project_out_kernels(&random_bump_field(g, &mut rng, 4.0));
        let eps = raw.scale_real(0.05 * rng.gen_range(0.2..1.0) / adapted_norm(&raw));
        let ratio_of = |e: &Field| {
            let ev = energy(&q.add(e).expect("same grid"), GaugeTag::Gauged);
            (ev, energy_bubbling_report(e, 1.0, ev, radius).ok().and_then(|r| r.ratio))
        };
        let (ev, r) = ratio_of(&eps);
        let (_, r_half) = ratio_of(&eps.scale_real(0.5));
        min_energy = min_energy.min(ev);
        match (r, r_half) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => {
                max_ratio = max_ratio.max(a);
                let h = if a > b { a / b } else { b / a };
                worst_halving = worst_halving.max(h);
            }
            _ => max_ratio = f64::INFINITY,
        }
    }
    (max_ratio, min_energy, worst_halving)
}

fn bubbling_items(g: Grid1D) -> Vec<CheckItem> {
    let s = Suite::Decomposition;
    let (max_ratio, min_energy, halving) = bubbling_sample(g, 100, 21, ExtractConfig::default().radius);
    vec![
        CheckItem::le(s, "energy bubbling ratio finite (max recorded)", max_ratio, f64::MAX),
        CheckItem::le(s, "E(Q + eps) >= 0 (-min)", (-min_energy).max(0.0), 0.0),
        CheckItem::le(s, "bubbling ratio change under amplitude halving", halving, 2.0),
    ]
}

fn two_bubble_items() -> Vec<CheckItem> {
    let s = Suite::Decomposition;
    let g = Grid1D::new(1 << 19, 16.0).expect("valid grid");
    let p1 = ModulationParams::new(5e-4, 0.0, -5.0).expect("valid parameters");
    let p2 = ModulationParams::new(5e-2, 1.0, 5.0).expect("valid parameters");
    let v = modulated_q(g, &p1)
        .add(&modulated_q(g, &p2))
        .and_then(|w| w.add(&gaussian(g, GaugeTag::Gauged, 0.1, 1.0, 0.0, 0.0)))
        .expect("same grid");
    let Ok(rep) = extract_bubbles(&v, &ExtractConfig::default()) else {
        return vec![CheckItem::failed(s, "two-bubble extraction", 0.0)];
    };
    let count_err = (rep.count() as f64 - 2.0).abs();
    let mut param = 0.0f64;
    for (b, p) in rep.bubbles.iter().zip([p1, p2]) {
        let q = b.params;
        param = param
            .max((q.lambda() / p.lambda() - 1.0).abs())
            .max(phase_distance(q.gamma(), p.gamma()))
            .max((q.x() - p.x()).abs() / p.lambda());
    }
    let ledger = rep.ledger.get(2).map(|l| l.defect.abs() / mass(&v)).unwrap_or(f64::INFINITY);
    let min_sep = rep.separations.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min);
    let pair_ok = ungauge_bubble_list(&rep)
        .map(|u| {
            u.solitons.len() == 2 && u.solitons[0].pair_phase == 0.0 && u.solitons[1].pair_phase == PI
        })
        .unwrap_or(false);
    vec![
        CheckItem::le(s, "two-bubble count error", count_err, 0.0),
        CheckItem::le(s, "two-bubble parameter error", param, 0.01),
        CheckItem::le(s, "two-bubble mass ledger defect / M", ledger, 0.01),
        CheckItem::le(s, "two-bubble 100 / min separation", 100.0 / min_sep, 1.0),
        CheckItem::le(s, "bubble count over floor((M + slack)/2pi)", rep.count() as f64 / rep.max_allowed as f64, 1.0),
        CheckItem::le(s, "pair phases follow center order (0 = yes)", if pair_ok { 0.0 } else { 1.0 }, 0.0),
    ]
}

fn tracking_items() -> Vec<CheckItem> {
    let s = Suite::Decomposition;
    let g = Grid1D::new(1 << 14, 25.0).expect("valid grid");
    let snaps: Vec<Snapshot> = (0..=8)
        .filter_map(|k| {
            let t = 0.02 + 0.01 * k as f64;
            explicit_blowup_s(t, g).ok().map(|f| Snapshot::new(t, f))
        })
        .collect();
    let cfg = ExtractConfig {
        alpha_star: f64::INFINITY,
        ..ExtractConfig::default()
    };
    let Ok(rep) = track_modulation(&Trajectory::from_snapshots(snaps), &cfg) else {
        return vec![CheckItem::failed(s, "S(t) tracking", 0.01)];
    };
    let xs: Vec<f64> = rep
        .rows
        .iter()
        .filter_map(|r| r.report.as_ref().ok().and_then(|x| x.bubbles.last().map(|b| b.params.x())))
        .collect();
    let spread = if xs.len() == rep.rows.len() {
        xs.iter().fold(0.0f64, |a, x| a.max((x - xs[0]).abs()))
    } else {
        f64::INFINITY
    };
    vec![
        CheckItem::le(s, "S(t) tracking |slope - 1|", (rep.lambda_slope - 1.0).abs(), 0.01),
        CheckItem::le(s, "S(t) tracking x(t) spread", spread, 1e-3),
    ]
}
