//! Time integration of both flows by integrating-factor RK4.
//!
//! The linear part `i∂ₓₓ` is propagated exactly in Fourier space; the
//! nonlinearity is evaluated in physical space on a zero-padded grid.

use num_complex::Complex64;

use crate::error::{CmError, Result};
use crate::fft;
use crate::field::{Field, GaugeTag};
use crate::functionals::{conserved, hdot1_seminorm, virial, ConservedSet, VirialPair, Q_HDOT1_NORM};
use crate::grid::Grid1D;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub equation: GaugeTag,
    pub grid: Grid1D,
    pub t_start: f64,
    pub t_end: f64,
    pub dt_max: f64,
    pub c_cfl: f64,
    pub c_lambda: f64,
    /// Stop once ‖f‖_{Ḣ¹} exceeds this value.
    pub hstop: f64,
    /// Zero-padding factor for the nonlinearity: 1, 2 or 3.
    pub dealias: usize,
    /// Time between recorded snapshots.
    pub output_every: f64,
    /// Relative mass/energy drift per unit time that flags a run.
    pub drift_budget: f64,
    #[doc(hidden)]
    pub fault_unscaled_padding: bool,
}

impl SimConfig {
    pub fn new(equation: GaugeTag, grid: Grid1D) -> Self {
        Self {
            equation,
            grid,
            t_start: 0.0,
            t_end: 1.0,
            dt_max: 1e-3,
            c_cfl: 1.0,
            c_lambda: 0.05,
            hstop: f64::INFINITY,
            dealias: 2,
            output_every: 0.1,
            drift_budget: 1e-8,
            fault_unscaled_padding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            errs.push(format!("dt_max = {} must be positive", self.dt_max));
        }
        if !(self.c_cfl > 0.0 && self.c_cfl.is_finite()) {
            errs.push(format!("c_cfl = {} must be positive", self.c_cfl));
        }
        if !(self.c_lambda > 0.0) {
            errs.push(format!("c_lambda = {} must be positive", self.c_lambda));
        }
        if !(self.hstop > 0.0) {
            errs.push(format!("hstop = {} must be positive", self.hstop));
        }
        if !(1..=3).contains(&self.dealias) {
            errs.push(format!("dealias = {} must be 1, 2 or 3", self.dealias));
        }
        if !(self.output_every > 0.0 && self.output_every.is_finite()) {
            errs.push(format!("output_every = {} must be positive", self.output_every));
        }
        if !(self.t_end.is_finite() && self.t_start.is_finite() && self.t_end >= self.t_start) {
            errs.push(format!(
                "t_end = {} must be finite and not before t_start = {}",
                self.t_end, self.t_start
            ));
        }
        if !(self.drift_budget > 0.0) {
            errs.push(format!("drift budget {} must be positive", self.drift_budget));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CmError::Config(errs))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
    pub conserved: ConservedSet,
    pub virial: VirialPair,
    pub hnorm: f64,
}

impl Snapshot {
    pub fn new(t: f64, field: Field) -> Self {
        Self {
            t,
            conserved: conserved(&field, t),
            virial: virial(&field),
            hnorm: hdot1_seminorm(&field),
            field,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    EndTime,
    HnormThreshold { t: f64, hnorm: f64 },
    NonFinite { t: f64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub stop: StopReason,
    pub steps: usize,
    /// Monitor budget violations; the run is flagged, not aborted.
    pub flags: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn from_snapshots(snapshots: Vec<Snapshot>) -> Self {
        Self {
            snapshots,
            stop: StopReason::EndTime,
            steps: 0,
            flags: Vec::new(),
        }
    }
}

/// Nonlinear term in Fourier space, evaluated on a grid padded by `p`.
struct Nonlinearity {
    grid: Grid1D,
    tag: GaugeTag,
    p: usize,
    unscaled: bool,
}

impl Nonlinearity {
    fn eval(&self, uhat: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        let big = self.p * n;
        let wrap = |k: i64| k.rem_euclid(big as i64) as usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); big];
        for (j, &c) in uhat.iter().enumerate() {
            buf[wrap(self.grid.mode(j))] = c;
        }
        fft::inverse_in_place(&mut buf);
        if !self.unscaled {
            let s = big as f64 / n as f64;
            for z in buf.iter_mut() {
                *z *= s;
            }
        }
        let u = buf;
        let mut rho: Vec<Complex64> = u.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
        fft::forward_in_place(&mut rho);
        let l = self.grid.half_width();
        let half = big as i64 / 2;
        for (j, z) in rho.iter_mut().enumerate() {
            let k = if (j as i64) < half { j as i64 } else { j as i64 - big as i64 };
            let xi = std::f64::consts::PI * k as f64 / l;
            let m = match self.tag {
                GaugeTag::Ungauged => {
                    if k > 0 {
                        xi
                    } else {
                        0.0
                    }
                }
                GaugeTag::Gauged => {
                    if k == -half {
                        0.0
                    } else {
                        xi.abs()
                    }
                }
            };
            *z *= m;
        }
        fft::inverse_in_place(&mut rho);
        let mut prod: Vec<Complex64> = match self.tag {
            GaugeTag::Ungauged => u.iter().zip(&rho).map(|(&z, &d)| 2.0 * I * d * z).collect(),
            GaugeTag::Gauged => u
                .iter()
                .zip(&rho)
                .map(|(&z, &d)| {
                    let m2 = z.norm_sqr();
                    I * d.re * z - 0.25 * I * m2 * m2 * z
                })
                .collect(),
        };
        fft::forward_in_place(&mut prod);
        let s = n as f64 / big as f64;
        let nyq = self.grid.nyquist_index();
        (0..n)
            .map(|j| {
                if j == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    prod[wrap(self.grid.mode(j))] * s
                }
            })
            .collect()
    }
}

fn check_dealias(p: usize) -> Result<()> {
    if !(1..=3).contains(&p) {
        return Err(CmError::InvalidArgument(format!(
            "dealias factor {p} must be 1, 2 or 3"
        )));
    }
    Ok(())
}

/// Nonlinear part of ∂ₜf: `2iD₊(|u|²)u` ungauged, `i|D|(|v|²)v - (i/4)|v|⁴v`
/// gauged. The full right-hand side is `i∂ₓₓf` plus this term.
pub fn rhs(f: &Field, dealias: usize) -> Result<Field> {
    check_dealias(dealias)?;
    let nl = Nonlinearity {
        grid: f.grid(),
        tag: f.tag(),
        p: dealias,
        unscaled: false,
    };
    let mut c = nl.eval(&f.coefficients());
    fft::inverse_in_place(&mut c);
    Ok(f.with_values(c))
}

struct Stepper {
    nl: Nonlinearity,
    xi2: Vec<f64>,
}

impl Stepper {
    fn new(grid: Grid1D, tag: GaugeTag, p: usize, unscaled: bool) -> Self {
        Self {
            nl: Nonlinearity { grid, tag, p, unscaled },
            xi2: grid.wavenumbers().iter().map(|x| x * x).collect(),
        }
    }

    fn step_hat(&self, u: &[Complex64], dt: f64) -> Vec<Complex64> {
        let e: Vec<Complex64> = self
            .xi2
            .iter()
            .map(|&k2| Complex64::from_polar(1.0, -k2 * dt / 2.0))
            .collect();
        let n = u.len();
        let h = dt / 2.0;
        let k1 = self.nl.eval(u);
        let a: Vec<Complex64> = (0..n).map(|j| e[j] * (u[j] + h * k1[j])).collect();
        let k2 = self.nl.eval(&a);
        let b: Vec<Complex64> = (0..n).map(|j| e[j] * u[j] + h * k2[j]).collect();
        let k3 = self.nl.eval(&b);
        let c: Vec<Complex64> = (0..n).map(|j| e[j] * (e[j] * u[j] + dt * k3[j])).collect();
        let k4 = self.nl.eval(&c);
        (0..n)
            .map(|j| {
                let e2 = e[j] * e[j];
                e2 * u[j] + dt / 6.0 * (e2 * k1[j] + 2.0 * e[j] * (k2[j] + k3[j]) + k4[j])
            })
            .collect()
    }
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// One integrating-factor RK4 step of size `dt` from time `t`; negative `dt`
/// steps backward.
pub fn step(f: &Field, t: f64, dt: f64, dealias: usize) -> Result<Field> {
    check_dealias(dealias)?;
    if !(dt.is_finite() && dt != 0.0) {
        return Err(CmError::InvalidArgument(format!("dt = {dt} must be finite and nonzero")));
    }
    if !f.is_finite() {
        return Err(CmError::NonFinite);
    }
    let st = Stepper::new(f.grid(), f.tag(), dealias, false);
    let out = st.step_hat(&f.coefficients(), dt);
    if !all_finite(&out) {
        return Err(CmError::BlowUp {
            t: t + dt,
            last_valid: Box::new(f.clone()),
        });
    }
    Ok(f.with_values(fft::inverse(&out)))
}

fn next_dt(cfg: &SimConfig, hnorm: f64) -> f64 {
    let dx = cfg.grid.dx();
    let lam = if hnorm > 0.0 { Q_HDOT1_NORM / hnorm } else { f64::INFINITY };
    cfg.dt_max.min(cfg.c_cfl * dx * dx).min(cfg.c_lambda * lam * lam)
}

/// Integrates from `cfg.t_start` to `cfg.t_end`, recording snapshots every
/// `cfg.output_every`.
pub fn run(cfg: &SimConfig, initial: &Field) -> Result<Trajectory> {
    cfg.validate()?;
    if !initial.grid().same_as(&cfg.grid) {
        return Err(CmError::GridMismatch);
    }
    initial.require_tag(cfg.equation)?;
    if !initial.is_finite() {
        return Err(CmError::NonFinite);
    }
    let st = Stepper::new(cfg.grid, cfg.equation, cfg.dealias, cfg.fault_unscaled_padding);
    let mut uhat = initial.coefficients().into_owned();
    let mut t = cfg.t_start;
    let mut current = initial.clone().to_physical();
    let mut snaps = vec![Snapshot::new(t, current.clone())];
    let mut out_k = 1usize;
    let mut steps = 0usize;
    let tol = 1e-12 * cfg.output_every.min(1.0);
    let stop = loop {
        if t >= cfg.t_end - tol {
            break StopReason::EndTime;
        }
        let h = hdot1_seminorm(&current);
        if h >= cfg.hstop {
            break StopReason::HnormThreshold { t, hnorm: h };
        }
        let t_out = (cfg.t_start + out_k as f64 * cfg.output_every).min(cfg.t_end);
        let mut dt = next_dt(cfg, h);
        let mut hits = false;
        if t + dt >= t_out - tol {
            dt = t_out - t;
            hits = true;
        }
        let next = st.step_hat(&uhat, dt);
        if !all_finite(&next) {
            break StopReason::NonFinite { t: t + dt };
        }
        uhat = next;
        steps += 1;
        t = if hits { t_out } else { t + dt };
        current = current.with_values(fft::inverse(&uhat));
        if hits {
            snaps.push(Snapshot::new(t, current.clone()));
            out_k += 1;
        }
    };
    if snaps.last().map(|s| s.t) != Some(t) {
        snaps.push(Snapshot::new(t, current));
    }
    let flags = drift_flags(cfg, &snaps);
    Ok(Trajectory {
        snapshots: snaps,
        stop,
        steps,
        flags,
    })
}

fn drift_flags(cfg: &SimConfig, snaps: &[Snapshot]) -> Vec<String> {
    let first = &snaps[0];
    let mut flags = Vec::new();
    for s in snaps.iter().skip(1) {
        let span = (s.t - first.t).max(1.0);
        let dm = (s.conserved.mass - first.conserved.mass).abs() / first.conserved.mass.max(1e-300);
        if dm > cfg.drift_budget * span {
            flags.push(format!("mass drift {dm:.3e} at t = {}", s.t));
        }
        let e0 = first.conserved.energy.abs().max(1e-300);
        let de = (s.conserved.energy - first.conserved.energy).abs() / e0;
        if de > cfg.drift_budget * span && first.conserved.energy > 1e-8 {
            flags.push(format!("energy drift {de:.3e} at t = {}", s.t));
        }
    }
    flags
}
