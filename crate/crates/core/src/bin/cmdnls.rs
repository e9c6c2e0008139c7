use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use cmdnls::decomposition::{extract_bubbles, track_modulation, ungauge_bubble_list, DecompositionReport, ExtractConfig};
use cmdnls::evolution::{run, StopReason};
use cmdnls::io::{load_config, read_snapshot, report_csv, write_series, write_snapshot, InitialSpec};
use cmdnls::states::{explicit_blowup_s, galilean, gauge, gauge_inverse, pseudo_conformal};
use cmdnls::verify::{run_suites, Suite, VerifyOptions};
use cmdnls::{CmError, Field, GaugeTag};

const EXIT_ERROR: u8 = 1;
const EXIT_BLOWUP: u8 = 2;
const EXIT_FIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "cmdnls", version, about = "Calogero-Moser DNLS solver and soliton-resolution diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate { config: PathBuf },
    /// Extract the bubble decomposition of a snapshot.
    Decompose {
        snapshot: PathBuf,
        #[arg(long = "R", default_value_t = 20.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, default_value_t = 8)]
        max_bubbles: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha_star: f64,
        /// Append the ungauged soliton list with corrected phases.
        #[arg(long)]
        ungauge: bool,
        /// Machine report path (default: <snapshot>.report.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a symmetry transform to a snapshot.
    #[command(group(ArgGroup::new("op").required(true).args(["gauge", "ungauge", "pseudoconformal", "galilean"])))]
    Transform {
        snapshot: PathBuf,
        #[arg(long)]
        gauge: bool,
        #[arg(long)]
        ungauge: bool,
        #[arg(long)]
        pseudoconformal: bool,
        #[arg(long, value_name = "C", allow_hyphen_values = true)]
        galilean: Option<f64>,
        /// Output path (default: <snapshot stem>.<op>.cmf).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite: operators, states, functionals, evolution, decomposition or all.
    Verify {
        suite: String,
        #[arg(long, hide = true)]
        sabotage_dealiasing: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => simulate(&config),
        Command::Decompose {
            snapshot,
            radius,
            theta,
            max_bubbles,
            alpha_star,
            ungauge,
            out,
        } => {
            let cfg = ExtractConfig {
                radius,
                theta,
                max_bubbles,
                alpha_star,
                ..ExtractConfig::default()
            };
            decompose(&snapshot, &cfg, ungauge, out)
        }
        Command::Transform {
            snapshot,
            gauge,
            ungauge,
            pseudoconformal,
            galilean,
            out,
        } => {
            let op = if gauge {
                Op::Gauge
            } else if ungauge {
                Op::Ungauge
            } else if pseudoconformal {
                Op::PseudoConformal
            } else {
                Op::Galilean(galilean.expect("clap enforces one operation"))
            };
            transform(&snapshot, op, out)
        }
        Command::Verify {
            suite,
            sabotage_dealiasing,
        } => verify(&suite, sabotage_dealiasing),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report_error(&e);
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn report_error(e: &CmError) {
    match e {
        CmError::Config(errs) => {
            eprintln!("error: invalid configuration");
            for m in errs {
                eprintln!("  - {m}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn create_dir(path: &Path) -> cmdnls::Result<()> {
    fs::create_dir_all(path).map_err(|source| CmError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn simulate(config: &Path) -> cmdnls::Result<u8> {
    let rc = load_config(config)?;
    let (initial, t0) = rc.initial.build(rc.sim.equation, rc.sim.grid)?;
    let mut sim = rc.sim.clone();
    sim.t_start = t0;
    if sim.t_end < t0 {
        return Err(CmError::Config(vec![format!(
            "t_end = {} lies before the initial time {t0}",
            sim.t_end
        )]));
    }
    create_dir(&rc.out_dir)?;
    let name = config.file_name().map(PathBuf::from).unwrap_or_else(|| "run.cfg".into());
    fs::copy(config, rc.out_dir.join(name)).map_err(|source| CmError::Io {
        path: config.display().to_string(),
        source,
    })?;

    let traj = run(&sim, &initial)?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        write_snapshot(&rc.out_dir.join(format!("snap_{k:05}.cmf")), &s.field, s.t)?;
    }
    let tracking = track_modulation(&traj, &rc.extract)?;
    let series = rc.out_dir.join("series.csv");
    write_series(&series, &traj, Some(&tracking))?;

    let last = traj.last();
    println!(
        "{} steps, {} snapshots, final t = {}; series in {}",
        traj.steps,
        traj.snapshots.len(),
        last.t,
        series.display()
    );
    for f in &traj.flags {
        println!("flag: {f}");
    }
    if let InitialSpec::S { .. } = rc.initial {
        if let Ok(exact) = explicit_blowup_s(last.t, sim.grid) {
            let exact = match sim.equation {
                GaugeTag::Ungauged => exact,
                GaugeTag::Gauged => gauge(&exact)?.scale_real(-1.0),
            };
            let err = last.field.l2_distance(&exact) / exact.norm_l2();
            println!("relative L2 error against S({}) = {err:.6e}", last.t);
        }
    }
    match traj.stop {
        StopReason::EndTime => Ok(0),
        StopReason::HnormThreshold { t, hnorm } => {
            println!("stopped at t = {t}: Ḣ¹ norm {hnorm:.6e} reached the threshold");
            Ok(EXIT_BLOWUP)
        }
        StopReason::NonFinite { t } => {
            println!("stopped at t = {t}: non-finite step; last finite state kept");
            Ok(EXIT_BLOWUP)
        }
    }
}

fn print_report(rep: &DecompositionReport) {
    println!(
        "mass {:.10}  bubbles {} (bound {})  theta {}  R {}",
        rep.mass,
        rep.count(),
        rep.max_allowed,
        rep.theta,
        rep.radius
    );
    if rep.count() > 0 {
        println!(
            "{:>3} {:>16} {:>12} {:>16} {:>12} {:>12}",
            "k", "lambda", "gamma", "x", "dichotomy", "|eps|_H1"
        );
    }
    for (k, b) in rep.bubbles.iter().enumerate() {
        println!(
            "{:>3} {:>16.9e} {:>12.9} {:>16.9e} {:>12.4e} {:>12.4e}",
            k + 1,
            b.params.lambda(),
            b.params.gamma(),
            b.params.x(),
            rep.dichotomy[k],
            b.eps_norm
        );
    }
    for l in &rep.ledger {
        println!(
            "ledger k={}: M - k*2pi = {:.10}  |eps_k|^2 = {:.10}  defect {:.3e}",
            l.level, l.expected, l.radiation_mass, l.defect
        );
    }
    for s in rep.separations.iter().filter(|s| s.flagged) {
        println!("separation flag: |x_{} - x_{}|/lambda_{} = {:.3e}", s.i + 1, s.j + 1, s.i + 1, s.ratio);
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
}

fn decompose(snapshot: &Path, cfg: &ExtractConfig, ungauge: bool, out: Option<PathBuf>) -> cmdnls::Result<u8> {
    let (field, t) = read_snapshot(snapshot)?;
    let v = match field.tag() {
        GaugeTag::Gauged => field,
        GaugeTag::Ungauged => {
            println!("ungauged snapshot: decomposing -G(u)");
            gauge(&field)?.scale_real(-1.0)
        }
    };
    let rep = extract_bubbles(&v, cfg)?;
    println!("snapshot {} at t = {t}", snapshot.display());
    print_report(&rep);
    let ung = if ungauge { Some(ungauge_bubble_list(&rep)?) } else { None };
    if let Some(u) = &ung {
        println!("ungauged solitons:");
        for (k, s) in u.solitons.iter().enumerate() {
            println!(
                "{:>3} lambda {:.9e}  gamma {:.9}  x {:.9e}  radiation phase {:.6e}  pair phase {:.6}",
                k + 1,
                s.params.lambda(),
                s.params.gamma(),
                s.params.x(),
                s.radiation_phase,
                s.pair_phase
            );
        }
    }
    let path = out.unwrap_or_else(|| {
        let mut p = snapshot.as_os_str().to_owned();
        p.push(".report.csv");
        PathBuf::from(p)
    });
    fs::write(&path, report_csv(&rep, ung.as_ref())?).map_err(|source| CmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    println!("report written to {}", path.display());
    if let Some(f) = &rep.failure {
        eprintln!("fit failure: {f}");
        return Ok(EXIT_FIT_FAILURE);
    }
    Ok(0)
}

#[derive(Clone, Copy)]
enum Op {
    Gauge,
    Ungauge,
    PseudoConformal,
    Galilean(f64),
}

impl Op {
    fn suffix(self) -> &'static str {
        match self {
            Op::Gauge => "gauged",
            Op::Ungauge => "ungauged",
            Op::PseudoConformal => "pc",
            Op::Galilean(_) => "galilean",
        }
    }
}

fn transform(snapshot: &Path, op: Op, out: Option<PathBuf>) -> cmdnls::Result<u8> {
    let (f, t) = read_snapshot(snapshot)?;
    let (g, t2): (Field, f64) = match op {
        Op::Gauge => (gauge(&f)?.scale_real(-1.0), t),
        Op::Ungauge => (gauge_inverse(&f)?.scale_real(-1.0), t),
        Op::PseudoConformal => pseudo_conformal(&f, t)?,
        Op::Galilean(c) => (galilean(&f, c, t), t),
    };
    let path = out.unwrap_or_else(|| {
        let stem = snapshot.file_stem().and_then(|s| s.to_str()).unwrap_or("snapshot");
        snapshot.with_file_name(format!("{stem}.{}.cmf", op.suffix()))
    });
    write_snapshot(&path, &g, t2)?;
    println!("{} ({}, t = {t2}) written to {}", op.suffix(), g.tag().name(), path.display());
    Ok(0)
}

fn verify(name: &str, sabotage: bool) -> cmdnls::Result<u8> {
    let Some(suites) = Suite::parse(name) else {
        eprintln!("error: unknown suite '{name}'; available: {}", Suite::names().join(", "));
        return Ok(EXIT_ERROR);
    };
    let items = run_suites(
        &suites,
        &VerifyOptions {
            sabotage_dealiasing: sabotage,
        },
    );
    for i in &items {
        println!("{i}");
    }
    let failed = items.iter().filter(|i| !i.passed).count();
    println!("{} items, {} failed", items.len(), failed);
    Ok(if failed == 0 { 0 } else { EXIT_ERROR })
}
