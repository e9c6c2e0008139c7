use std::ffi::{CStr, CString};
use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::ptr;

use cmdnls_ffi::*;

fn last_error() -> String {
    let p = cm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn ground_state(tag: u8) -> *mut CmField {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { cm_field_ground_state(4096, 100.0, tag, &mut f) }, CmStatus::Ok);
    assert!(!f.is_null());
    f
}

fn gaussian(n: u32, half_width: f64, tag: u8) -> *mut CmField {
    let dx = 2.0 * half_width / n as f64;
    let mut s = Vec::with_capacity(2 * n as usize);
    for j in 0..n {
        let x = -half_width + j as f64 * dx;
        let a = (-x * x / 2.0).exp();
        s.push(a * (0.5 * x).cos());
        s.push(a * (0.5 * x).sin());
    }
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { cm_field_new(n, half_width, tag, 0.0, s.as_ptr(), &mut f) }, CmStatus::Ok);
    f
}

#[test]
fn field_round_trip_through_buffers() {
    unsafe {
        let f = gaussian(256, 10.0, CM_UNGAUGED);
        assert_eq!(cm_field_len(f), 256);
        assert_eq!(cm_field_half_width(f), 10.0);
        assert_eq!(cm_field_tag(f), CM_UNGAUGED);
        assert_eq!(cm_field_time(f), 0.0);
        let mut buf = vec![0.0; 512];
        assert_eq!(cm_field_samples(f, buf.as_mut_ptr(), buf.len()), CmStatus::Ok);
        assert_eq!(buf[256], 1.0);
        assert_eq!(cm_field_samples(f, buf.as_mut_ptr(), 10), CmStatus::InvalidArgument);
        assert!(last_error().contains("need 512"));
        cm_field_free(f);
    }
}

#[test]
fn bad_inputs_report_status_and_message() {
    unsafe {
        let mut f = ptr::null_mut();
        let s = [0.0; 24];
        assert_eq!(cm_field_new(12, 1.0, CM_GAUGED, 0.0, s.as_ptr(), &mut f), CmStatus::InvalidGrid);
        assert!(f.is_null());
        assert_eq!(cm_field_new(8, 1.0, 7, 0.0, s.as_ptr(), &mut f), CmStatus::InvalidArgument);
        assert!(last_error().contains("tag"));
        assert_eq!(cm_field_new(8, 1.0, CM_GAUGED, 0.0, ptr::null(), &mut f), CmStatus::NullPointer);
        let nan = [f64::NAN; 16];
        assert_eq!(cm_field_new(8, 1.0, CM_GAUGED, 0.0, nan.as_ptr(), &mut f), CmStatus::NonFinite);

        assert_eq!(cm_field_len(ptr::null()), 0);
        assert_eq!(cm_field_tag(ptr::null()), u8::MAX);
        assert!(cm_field_time(ptr::null()).is_nan());
        cm_field_free(ptr::null_mut());
        cm_report_free(ptr::null_mut());
    }
}

#[test]
fn ground_states_have_mass_two_pi_and_small_energy() {
    unsafe {
        for tag in [CM_GAUGED, CM_UNGAUGED] {
            let f = ground_state(tag);
            let mut c = CmConserved::default();
            assert_eq!(cm_field_conserved(f, &mut c), CmStatus::Ok);
            assert!((c.mass - TAU).abs() / TAU < 0.01);
            assert!(c.energy.abs() < 1e-5);
            cm_field_free(f);
        }
    }
}

#[test]
fn gauge_maps_r_to_q_and_checks_tags() {
    unsafe {
        let r = ground_state(CM_UNGAUGED);
        let q = ground_state(CM_GAUGED);
        let mut g = ptr::null_mut();
        assert_eq!(cm_field_gauge(r, &mut g), CmStatus::Ok);
        assert_eq!(cm_field_tag(g), CM_GAUGED);
        let n = cm_field_len(q);
        let (mut a, mut b) = (vec![0.0; 2 * n], vec![0.0; 2 * n]);
        cm_field_samples(g, a.as_mut_ptr(), a.len());
        cm_field_samples(q, b.as_mut_ptr(), b.len());
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // the left tail carries a phase of order 1/L
        assert!(diff < 2e-2, "{diff}");

        let mut back = ptr::null_mut();
        assert_eq!(cm_field_ungauge(g, &mut back), CmStatus::Ok);
        assert_eq!(cm_field_tag(back), CM_UNGAUGED);

        let mut twice = ptr::null_mut();
        assert_eq!(cm_field_gauge(q, &mut twice), CmStatus::TagMismatch);
        assert!(twice.is_null());
        for p in [r, q, g, back] {
            cm_field_free(p);
        }
    }
}

#[test]
fn stepping_conserves_mass_and_reverses() {
    unsafe {
        let f = gaussian(512, 20.0, CM_GAUGED);
        let mut c0 = CmConserved::default();
        cm_field_conserved(f, &mut c0);
        let mut before = vec![0.0; 1024];
        cm_field_samples(f, before.as_mut_ptr(), before.len());
        assert_eq!(cm_field_step(f, 1e-3, 2), CmStatus::Ok);
        assert!((cm_field_time(f) - 1e-3).abs() < 1e-15);
        assert_eq!(cm_field_step(f, -1e-3, 2), CmStatus::Ok);
        let mut after = vec![0.0; 1024];
        cm_field_samples(f, after.as_mut_ptr(), after.len());
        let d = before.iter().zip(&after).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");

        assert_eq!(cm_field_evolve(f, 0.05, 3, 0.0), CmStatus::Ok);
        assert_eq!(cm_field_time(f), 0.05);
        let mut c1 = CmConserved::default();
        cm_field_conserved(f, &mut c1);
        assert!((c1.mass - c0.mass).abs() / c0.mass < 1e-10);
        assert_eq!(cm_field_step(f, 1e-3, 5), CmStatus::InvalidArgument);
        cm_field_free(f);
    }
}

#[test]
fn evolve_reports_threshold_stop() {
    unsafe {
        let f = gaussian(256, 10.0, CM_UNGAUGED);
        assert_eq!(cm_field_evolve(f, 0.1, 2, 1e-3), CmStatus::BlowUp);
        assert!(last_error().contains("threshold"));
        assert_eq!(cm_field_time(f), 0.0);
        cm_field_free(f);
    }
}

#[test]
fn snapshots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.cmf").to_str().unwrap()).unwrap();
    unsafe {
        let f = gaussian(64, 5.0, CM_GAUGED);
        assert_eq!(cm_snapshot_write(f, path.as_ptr()), CmStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(cm_snapshot_read(path.as_ptr(), &mut g), CmStatus::Ok);
        let (mut a, mut b) = (vec![0.0; 128], vec![0.0; 128]);
        cm_field_samples(f, a.as_mut_ptr(), 128);
        cm_field_samples(g, b.as_mut_ptr(), 128);
        assert_eq!(a, b);
        assert_eq!(cm_field_tag(g), CM_GAUGED);
        cm_field_free(f);
        cm_field_free(g);

        let missing = CString::new(dir.path().join("none.cmf").to_str().unwrap()).unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(cm_snapshot_read(missing.as_ptr(), &mut h), CmStatus::Io);
        assert!(last_error().contains("none.cmf"));
    }
}

#[test]
fn decomposition_of_the_ground_state() {
    unsafe {
        let q = ground_state(CM_GAUGED);
        let opts = cm_extract_options_default();
        assert_eq!(opts.max_bubbles, 8);
        let mut r = ptr::null_mut();
        assert_eq!(cm_decompose(q, &opts, &mut r), CmStatus::Ok);
        assert_eq!(cm_report_count(r), 1);
        assert!(cm_report_max_allowed(r) >= 1);
        assert!(!cm_report_fit_failed(r));
        let mut b = CmBubble::default();
        assert_eq!(cm_report_bubble(r, 0, &mut b), CmStatus::Ok);
        assert!((b.lambda - 1.0).abs() < 1e-6);
        assert!(b.x.abs() < 1e-6);
        assert_eq!(cm_report_bubble(r, 1, &mut b), CmStatus::InvalidArgument);
        let mut defect = 0.0;
        assert_eq!(cm_report_ledger_defect(r, 0, &mut defect), CmStatus::Ok);
        assert_eq!(defect, 0.0);
        assert_eq!(cm_report_ledger_defect(r, 9, &mut defect), CmStatus::InvalidArgument);
        cm_report_free(r);

        let u = ground_state(CM_UNGAUGED);
        assert_eq!(cm_decompose(u, &opts, &mut r), CmStatus::TagMismatch);
        cm_field_free(q);
        cm_field_free(u);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cmdnls.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["cm_field_new", "cm_decompose", "cm_last_error", "typedef struct CmField CmField"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"cmdnls.h\"\nint main(void) { CmExtractOptions o = cm_extract_options_default(); return o.max_bubbles == 0; }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .expect("a C compiler is on PATH");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
