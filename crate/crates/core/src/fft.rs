//! Shared FFT plans. Forward has no prefactor, inverse carries 1/n.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if forward {
        p.plan_fft_forward(n)
    } else {
        p.plan_fft_inverse(n)
    }
}

pub fn forward_in_place(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    plan(data.len(), true).process(data);
}

pub fn inverse_in_place(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    plan(data.len(), false).process(data);
    let s = 1.0 / data.len() as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

pub fn forward(data: &[Complex64]) -> Vec<Complex64> {
    let mut out = data.to_vec();
    forward_in_place(&mut out);
    out
}

pub fn inverse(data: &[Complex64]) -> Vec<Complex64> {
    let mut out = data.to_vec();
    inverse_in_place(&mut out);
    out
}
