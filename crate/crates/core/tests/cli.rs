use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cmdnls::io::{read_series, read_snapshot, write_snapshot};
use cmdnls::states::gauge;
use cmdnls::{Field, GaugeTag, Grid1D};
use num_complex::Complex64;

fn cmdnls(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmdnls"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const Q_RUN: &str = "equation = gauged
n = 512
L = 30
t_end = 0.05
output_every = 0.025
initial = Q lambda=1 gamma=0 x=0
out_dir = run
";

#[test]
fn simulate_then_decompose_recovers_the_soliton() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("q.cfg"), Q_RUN).unwrap();
    let o = cmdnls(&["simulate", "q.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let run = dir.path().join("run");
    assert!(run.join("q.cfg").exists());
    let series = read_series(&run.join("series.csv")).unwrap();
    let t = series.column("t").unwrap();
    assert_eq!(t.len(), 3);
    assert!((t[2].unwrap() - 0.05).abs() < 1e-12);
    let mass = series.column("mass").unwrap();
    assert!((mass[2].unwrap() - mass[0].unwrap()).abs() < 1e-9);
    let lam = series.column("lambda_1").unwrap();
    assert!((lam[2].unwrap() - 1.0).abs() < 1e-4);

    let o = cmdnls(&["decompose", "run/snap_00002.cmf", "--out", "rep.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("bubbles 1"));
    let rep = fs::read_to_string(dir.path().join("rep.csv")).unwrap();
    assert!(rep.starts_with("section,index,name,value"));
    assert!(rep.contains("bubble,1,lambda,"));
}

#[test]
fn bad_config_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "equation = sideways\nn = 100\nbogus = 2\n").unwrap();
    let o = cmdnls(&["simulate", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for needle in ["equation", "bogus", "initial", "out_dir", "n"] {
        assert!(err.contains(needle), "{needle} missing: {err}");
    }
}

#[test]
fn hnorm_stop_exits_with_two_and_keeps_last_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "equation = ungauged
n = 1024
L = 25
t_end = 1
hstop = 5
initial = S t0=0.5
out_dir = run
";
    fs::write(dir.path().join("s.cfg"), cfg).unwrap();
    let o = cmdnls(&["simulate", "s.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("threshold"));
    assert!(stdout(&o).contains("relative L2 error"));
    let series = read_series(&dir.path().join("run/series.csv")).unwrap();
    let t = series.column("t").unwrap();
    // ‖S(0.5)‖_Ḣ¹ ≈ 7.8 already exceeds the threshold
    assert_eq!(t, vec![Some(0.5)]);
    let (f, t) = read_snapshot(&dir.path().join("run/snap_00000.cmf")).unwrap();
    assert_eq!((f.tag(), t), (GaugeTag::Ungauged, 0.5));
}

fn write_gaussian(path: &Path, tag: GaugeTag) -> Field {
    let g = Grid1D::new(256, 10.0).unwrap();
    let f = Field::from_fn(g, tag, |x| Complex64::from_polar((-x * x).exp(), 0.3 * x));
    write_snapshot(path, &f, 0.25).unwrap();
    f
}

#[test]
fn transform_gauge_round_trip_and_tag_checks() {
    let dir = tempfile::tempdir().unwrap();
    let u = write_gaussian(&dir.path().join("u.cmf"), GaugeTag::Ungauged);

    let o = cmdnls(&["transform", "u.cmf", "--gauge", "-o", "v.cmf"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (v, t) = read_snapshot(&dir.path().join("v.cmf")).unwrap();
    assert_eq!(t, 0.25);
    assert_eq!(v.tag(), GaugeTag::Gauged);
    let expect = gauge(&u).unwrap().scale_real(-1.0);
    assert!(v.l2_distance(&expect) < 1e-14);

    let o = cmdnls(&["transform", "v.cmf", "--ungauge", "-o", "w.cmf"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (w, _) = read_snapshot(&dir.path().join("w.cmf")).unwrap();
    assert!(w.l2_distance(&u) < 1e-12 * u.norm_l2());

    // gauging an already gauged field is refused
    let o = cmdnls(&["transform", "v.cmf", "--gauge"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn transform_pseudoconformal_and_galilean() {
    let dir = tempfile::tempdir().unwrap();
    write_gaussian(&dir.path().join("u.cmf"), GaugeTag::Ungauged);
    let o = cmdnls(&["transform", "u.cmf", "--pseudoconformal"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, t) = read_snapshot(&dir.path().join("u.pc.cmf")).unwrap();
    assert_eq!(t, -4.0);

    let o = cmdnls(&["transform", "u.cmf", "--galilean", "-0.5", "-o", "b.cmf"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (b, _) = read_snapshot(&dir.path().join("b.cmf")).unwrap();
    assert_eq!(b.tag(), GaugeTag::Ungauged);

    let o = cmdnls(&["transform", "u.cmf"], dir.path());
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn missing_snapshot_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmdnls(&["decompose", "nope.cmf"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.cmf"));
}

#[test]
fn verify_unknown_suite_lists_the_choices() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmdnls(&["verify", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("operators, states, functionals, evolution, decomposition, all"));
}

#[test]
fn verify_operators_passes_and_sabotage_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmdnls(&["verify", "operators"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS operators/")));

    let o = cmdnls(&["verify", "evolution", "--sabotage-dealiasing"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL evolution/")));
}
