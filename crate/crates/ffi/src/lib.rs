//! C interface to the cmdnls solver and bubble decomposition.
//!
//! Every fallible function returns a [`CmStatus`]; on failure the message is
//! kept per thread and read back with [`cm_last_error`]. Handles are opaque
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cmdnls::decomposition::{extract_bubbles, DecompositionReport, ExtractConfig};
use cmdnls::evolution::{run, step, SimConfig, StopReason};
use cmdnls::functionals::conserved;
use cmdnls::io::{read_snapshot, write_snapshot};
use cmdnls::num_complex::Complex64;
use cmdnls::states::{gauge, gauge_inverse, ground_state_q, ground_state_r};
use cmdnls::{CmError, Field, GaugeTag, Grid1D};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    TagMismatch = 4,
    GridMismatch = 5,
    NonFinite = 6,
    /// The run stopped early at the Ḣ¹ threshold or on a non-finite step.
    /// The field holds the last finite state.
    BlowUp = 7,
    FitFailed = 8,
    SmallEnergy = 9,
    Io = 10,
    Format = 11,
    Panic = 12,
}

/// Gauge tag of a field: 0 for ungauged, 1 for gauged.
pub const CM_UNGAUGED: u8 = 0;
pub const CM_GAUGED: u8 = 1;

/// A field on a periodic grid together with its time.
pub struct CmField {
    field: Field,
    t: f64,
}

/// Result of a bubble decomposition.
pub struct CmReport {
    report: DecompositionReport,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CmConserved {
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmExtractOptions {
    pub radius: f64,
    pub theta: f64,
    pub alpha_star: f64,
    pub max_bubbles: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CmBubble {
    pub lambda: f64,
    pub gamma: f64,
    pub x: f64,
    pub dichotomy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CmError) -> CmStatus {
    match e {
        CmError::InvalidGrid(_) => CmStatus::InvalidGrid,
        CmError::GridMismatch => CmStatus::GridMismatch,
        CmError::TagMismatch { .. } => CmStatus::TagMismatch,
        CmError::NonFinite => CmStatus::NonFinite,
        CmError::BlowUp { .. } => CmStatus::BlowUp,
        CmError::FitFailed(_) => CmStatus::FitFailed,
        CmError::SmallEnergy { .. } => CmStatus::SmallEnergy,
        CmError::Io { .. } => CmStatus::Io,
        CmError::Format(_) => CmStatus::Format,
        _ => CmStatus::InvalidArgument,
    }
}

fn fail(e: CmError) -> CmStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> CmStatus {
    set_error(format!("null pointer passed as {what}"));
    CmStatus::NullPointer
}

/// Runs `f`, turning a panic into [`CmStatus::Panic`].
fn guard(f: impl FnOnce() -> CmStatus) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CmStatus::Panic
        }
    }
}

fn tag_from(code: u8) -> Result<GaugeTag, CmError> {
    GaugeTag::from_code(code).ok_or_else(|| CmError::InvalidArgument(format!("unknown gauge tag {code}")))
}

unsafe fn path_from<'a>(p: *const c_char) -> Result<&'a Path, CmError> {
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| CmError::InvalidArgument("path is not valid UTF-8".into()))
}

unsafe fn emit(out: *mut *mut CmField, field: Field, t: f64) -> CmStatus {
    *out = Box::into_raw(Box::new(CmField { field, t }));
    CmStatus::Ok
}

/// Message of the last failed call on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a field from `2n` interleaved doubles (re, im) on [-L, L).
///
/// # Safety
/// `samples` must point to `2n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_field_new(
    n: u32,
    half_width: f64,
    tag: u8,
    t: f64,
    samples: *const f64,
    out: *mut *mut CmField,
) -> CmStatus {
    if samples.is_null() {
        return null("samples");
    }
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let made = (|| {
            let grid = Grid1D::new(n as usize, half_width)?;
            let tag = tag_from(tag)?;
            let raw = std::slice::from_raw_parts(samples, 2 * n as usize);
            if raw.iter().any(|x| !x.is_finite()) {
                return Err(CmError::NonFinite);
            }
            let z = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
            Field::from_samples(grid, tag, z)
        })();
        match made {
            Ok(f) => emit(out, f, t),
            Err(e) => fail(e),
        }
    })
}

/// Creates the ground state: Q for a gauged tag, 𝓡 for an ungauged one.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_field_ground_state(n: u32, half_width: f64, tag: u8, out: *mut *mut CmField) -> CmStatus {
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let made = Grid1D::new(n as usize, half_width).and_then(|g| {
            Ok(match tag_from(tag)? {
                GaugeTag::Gauged => ground_state_q(g),
                GaugeTag::Ungauged => ground_state_r(g),
            })
        });
        match made {
            Ok(f) => emit(out, f, 0.0),
            Err(e) => fail(e),
        }
    })
}

/// Releases a field. Null is ignored.
///
/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_field_free(f: *mut CmField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of grid points, 0 for null.
///
/// # Safety
/// `f` must be null or a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_len(f: *const CmField) -> usize {
    f.as_ref().map_or(0, |h| h.field.grid().n())
}

/// Half-width L of the grid, NaN for null.
///
/// # Safety
/// `f` must be null or a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_half_width(f: *const CmField) -> f64 {
    f.as_ref().map_or(f64::NAN, |h| h.field.grid().half_width())
}

/// Time stamp of the field, NaN for null.
///
/// # Safety
/// `f` must be null or a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_time(f: *const CmField) -> f64 {
    f.as_ref().map_or(f64::NAN, |h| h.t)
}

/// Gauge tag code, 255 for null.
///
/// # Safety
/// `f` must be null or a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_tag(f: *const CmField) -> u8 {
    f.as_ref().map_or(u8::MAX, |h| h.field.tag().code())
}

/// Copies the samples as interleaved (re, im) into `out`, which holds `cap`
/// doubles; `cap` must be at least `2 * cm_field_len(f)`.
///
/// # Safety
/// `f` must be a live field and `out` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_field_samples(f: *const CmField, out: *mut f64, cap: usize) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    if out.is_null() {
        return null("out");
    }
    let vals = h.field.values();
    if cap < 2 * vals.len() {
        return fail(CmError::InvalidArgument(format!(
            "buffer holds {cap} doubles, need {}",
            2 * vals.len()
        )));
    }
    let dst = std::slice::from_raw_parts_mut(out, 2 * vals.len());
    for (p, z) in dst.chunks_exact_mut(2).zip(vals.iter()) {
        p[0] = z.re;
        p[1] = z.im;
    }
    CmStatus::Ok
}

/// Reads a binary snapshot.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_snapshot_read(path: *const c_char, out: *mut *mut CmField) -> CmStatus {
    if path.is_null() {
        return null("path");
    }
    if out.is_null() {
        return null("out");
    }
    guard(|| match path_from(path).and_then(read_snapshot) {
        Ok((f, t)) => emit(out, f, t),
        Err(e) => fail(e),
    })
}

/// Writes a binary snapshot of the field at its own time.
///
/// # Safety
/// `f` must be a live field and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cm_snapshot_write(f: *const CmField, path: *const c_char) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    if path.is_null() {
        return null("path");
    }
    guard(|| match path_from(path).and_then(|p| write_snapshot(p, &h.field, h.t)) {
        Ok(()) => CmStatus::Ok,
        Err(e) => fail(e),
    })
}

/// Mass, energy and momentum for the field's own flow.
///
/// # Safety
/// `f` must be a live field and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_field_conserved(f: *const CmField, out: *mut CmConserved) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let c = conserved(&h.field, h.t);
        *out = CmConserved {
            mass: c.mass,
            energy: c.energy,
            momentum: c.momentum,
        };
        CmStatus::Ok
    })
}

/// Maps an ungauged field u to the gauged field -𝒢(u).
///
/// # Safety
/// `f` must be a live field and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_field_gauge(f: *const CmField, out: *mut *mut CmField) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    if out.is_null() {
        return null("out");
    }
    guard(|| match gauge(&h.field) {
        Ok(g) => emit(out, g.scale_real(-1.0), h.t),
        Err(e) => fail(e),
    })
}

/// Inverse of [`cm_field_gauge`].
///
/// # Safety
/// `f` must be a live field and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_field_ungauge(f: *const CmField, out: *mut *mut CmField) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    if out.is_null() {
        return null("out");
    }
    guard(|| match gauge_inverse(&h.field) {
        Ok(g) => emit(out, g.scale_real(-1.0), h.t),
        Err(e) => fail(e),
    })
}

/// Advances the field in place by one step of size `dt` (negative runs
/// backwards). `dealias` is 2 or 3.
///
/// # Safety
/// `f` must be a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_step(f: *mut CmField, dt: f64, dealias: u32) -> CmStatus {
    let Some(h) = f.as_mut() else { return null("field") };
    guard(|| match step(&h.field, h.t, dt, dealias as usize) {
        Ok(g) => {
            h.field = g;
            h.t += dt;
            CmStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Evolves the field in place to `t_end` with adaptive steps. A positive
/// `hstop` stops early once the Ḣ¹ norm reaches it, returning
/// [`CmStatus::BlowUp`] with the last state kept.
///
/// # Safety
/// `f` must be a live field.
#[no_mangle]
pub unsafe extern "C" fn cm_field_evolve(f: *mut CmField, t_end: f64, dealias: u32, hstop: f64) -> CmStatus {
    let Some(h) = f.as_mut() else { return null("field") };
    guard(|| {
        let mut cfg = SimConfig::new(h.field.tag(), h.field.grid());
        cfg.t_start = h.t;
        cfg.t_end = t_end;
        cfg.output_every = (t_end - h.t).max(f64::MIN_POSITIVE);
        cfg.dealias = dealias as usize;
        if hstop > 0.0 {
            cfg.hstop = hstop;
        }
        match run(&cfg, &h.field) {
            Ok(tr) => {
                let last = tr.last();
                h.field = last.field.clone();
                h.t = last.t;
                match tr.stop {
                    StopReason::EndTime => CmStatus::Ok,
                    StopReason::HnormThreshold { t, hnorm } => {
                        set_error(format!("Ḣ¹ norm {hnorm:.6e} reached the threshold at t = {t}"));
                        CmStatus::BlowUp
                    }
                    StopReason::NonFinite { t } => {
                        set_error(format!("non-finite step at t = {t}"));
                        CmStatus::BlowUp
                    }
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Default extraction options.
#[no_mangle]
pub extern "C" fn cm_extract_options_default() -> CmExtractOptions {
    let d = ExtractConfig::default();
    CmExtractOptions {
        radius: d.radius,
        theta: d.theta,
        alpha_star: d.alpha_star,
        max_bubbles: d.max_bubbles as u32,
    }
}

/// Extracts the bubble decomposition of a gauged field. A fit failure still
/// yields a report; check [`cm_report_fit_failed`].
///
/// # Safety
/// `f` must be a live field, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_decompose(
    f: *const CmField,
    opts: *const CmExtractOptions,
    out: *mut *mut CmReport,
) -> CmStatus {
    let Some(h) = f.as_ref() else { return null("field") };
    let Some(o) = opts.as_ref() else { return null("options") };
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let cfg = ExtractConfig {
            radius: o.radius,
            theta: o.theta,
            alpha_star: o.alpha_star,
            max_bubbles: o.max_bubbles as usize,
            ..ExtractConfig::default()
        };
        match extract_bubbles(&h.field, &cfg) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(CmReport { report }));
                CmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_report_free(r: *mut CmReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of extracted bubbles, 0 for null.
///
/// # Safety
/// `r` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn cm_report_count(r: *const CmReport) -> usize {
    r.as_ref().map_or(0, |h| h.report.count())
}

/// Bubble budget used by the extraction, 0 for null.
///
/// # Safety
/// `r` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn cm_report_max_allowed(r: *const CmReport) -> usize {
    r.as_ref().map_or(0, |h| h.report.max_allowed)
}

/// True when a level's fit failed; the message is in [`cm_last_error`].
///
/// # Safety
/// `r` must be null or a live report.
#[no_mangle]
pub unsafe extern "C" fn cm_report_fit_failed(r: *const CmReport) -> bool {
    match r.as_ref().and_then(|h| h.report.failure.as_ref()) {
        Some(f) => {
            set_error(format!("modulation fit failed: {f}"));
            true
        }
        None => false,
    }
}

/// Parameters of bubble `index` (0-based, extraction order).
///
/// # Safety
/// `r` must be a live report and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_report_bubble(r: *const CmReport, index: usize, out: *mut CmBubble) -> CmStatus {
    let Some(h) = r.as_ref() else { return null("report") };
    if out.is_null() {
        return null("out");
    }
    let rep = &h.report;
    let Some(b) = rep.bubbles.get(index) else {
        return fail(CmError::InvalidArgument(format!(
            "bubble index {index} out of range (count {})",
            rep.count()
        )));
    };
    *out = CmBubble {
        lambda: b.params.lambda(),
        gamma: b.params.gamma(),
        x: b.params.x(),
        dichotomy: rep.dichotomy.get(index).copied().unwrap_or(f64::NAN),
    };
    CmStatus::Ok
}

/// Mass-ledger defect at level `k`: (M - 2πk) - ‖ε_k‖².
///
/// # Safety
/// `r` must be a live report and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_report_ledger_defect(r: *const CmReport, level: usize, out: *mut f64) -> CmStatus {
    let Some(h) = r.as_ref() else { return null("report") };
    if out.is_null() {
        return null("out");
    }
    match h.report.ledger.iter().find(|l| l.level == level) {
        Some(l) => {
            *out = l.defect;
            CmStatus::Ok
        }
        None => fail(CmError::InvalidArgument(format!("no ledger entry for level {level}"))),
    }
}
