//! Run configuration files, binary snapshots, series CSV and machine reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::decomposition::{DecompositionReport, ExtractConfig, TrackingReport, UngaugedReport};
use crate::error::{CmError, Result};
use crate::evolution::{SimConfig, Trajectory};
use crate::field::{Field, GaugeTag};
use crate::grid::Grid1D;
use crate::states::{explicit_blowup_s, gauge, modulated_q, modulated_r, ModulationParams};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CMF1";
/// Magic (4) + n (4) + L (8) + t (8) + tag (1).
pub const SNAPSHOT_HEADER_LEN: usize = 25;

/// Column names of a series file before the per-bubble block.
pub const SERIES_BASE_COLUMNS: [&str; 7] = ["t", "mass", "energy", "momentum", "v1", "v2", "hnorm"];

const KNOWN_KEYS: [&str; 15] = [
    "equation",
    "n",
    "L",
    "dt_max",
    "c_cfl",
    "c_lambda",
    "t_end",
    "hstop",
    "dealias",
    "output_every",
    "R",
    "theta",
    "alpha_star",
    "initial",
    "out_dir",
];

fn io_err(path: &Path, source: std::io::Error) -> CmError {
    CmError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Initial data named in a config file.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    /// `Q lambda=.. gamma=.. x=..`, gauged.
    Q(ModulationParams),
    /// `R lambda=.. gamma=.. x=..`, ungauged.
    R(ModulationParams),
    /// `S t0=..`: the explicit blow-up solution, starting at t0.
    S { t0: f64 },
    /// `gaussian amp=.. width=.. x=.. c=..`: amp·e^{-(x-x₀)²/2w²}·e^{icx}.
    Gaussian { amp: f64, width: f64, center: f64, velocity: f64 },
    /// `snapshot <path>`.
    Snapshot(PathBuf),
}

impl InitialSpec {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut words = s.split_whitespace();
        let name = words.next().ok_or("initial: empty value")?;
        if name == "snapshot" {
            let path = words.collect::<Vec<_>>().join(" ");
            if path.is_empty() {
                return Err("initial: snapshot needs a path".into());
            }
            return Ok(Self::Snapshot(PathBuf::from(path)));
        }
        let mut kv = BTreeMap::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| format!("initial: expected key=value, got '{w}'"))?;
            let v: f64 = v
                .parse()
                .map_err(|_| format!("initial: '{v}' is not a number for {k}"))?;
            kv.insert(k.to_string(), v);
        }
        let mut take = |k: &str, default: f64| kv.remove(k).unwrap_or(default);
        let spec = match name {
            "Q" | "R" => {
                let g = ModulationParams::new(take("lambda", 1.0), take("gamma", 0.0), take("x", 0.0))
                    .map_err(|e| format!("initial: {e}"))?;
                if name == "Q" {
                    Self::Q(g)
                } else {
                    Self::R(g)
                }
            }
            "S" => Self::S { t0: take("t0", 1.0) },
            "gaussian" => Self::Gaussian {
                amp: take("amp", 1.0),
                width: take("width", 1.0),
                center: take("x", 0.0),
                velocity: take("c", 0.0),
            },
            other => {
                return Err(format!(
                    "initial: unknown builtin '{other}' (expected Q, R, S, gaussian or snapshot)"
                ))
            }
        };
        if let Some(k) = kv.keys().next() {
            return Err(format!("initial: unknown parameter '{k}' for {name}"));
        }
        Ok(spec)
    }

    /// Builds the initial field for `equation` and returns it with its start time.
    /// Q and R are tied to their own flows; S on the gauged side is -𝒢(S).
    pub fn build(&self, equation: GaugeTag, grid: Grid1D) -> Result<(Field, f64)> {
        let mismatch = |found| CmError::TagMismatch {
            expected: equation,
            found,
        };
        match self {
            Self::Q(g) => match equation {
                GaugeTag::Gauged => Ok((modulated_q(grid, g), 0.0)),
                GaugeTag::Ungauged => Err(mismatch(GaugeTag::Gauged)),
            },
            Self::R(g) => match equation {
                GaugeTag::Ungauged => Ok((modulated_r(grid, g), 0.0)),
                GaugeTag::Gauged => Err(mismatch(GaugeTag::Ungauged)),
            },
            Self::S { t0 } => {
                let s = explicit_blowup_s(*t0, grid)?;
                let f = match equation {
                    GaugeTag::Ungauged => s,
                    GaugeTag::Gauged => gauge(&s)?.scale_real(-1.0),
                };
                Ok((f, *t0))
            }
            Self::Gaussian {
                amp,
                width,
                center,
                velocity,
            } => {
                if !(*width > 0.0) {
                    return Err(CmError::InvalidArgument("gaussian width must be positive".into()));
                }
                let f = Field::from_fn(grid, equation, |x| {
                    let s = (x - center) / width;
                    Complex64::from_polar(amp * (-0.5 * s * s).exp(), velocity * x)
                });
                Ok((f, 0.0))
            }
            Self::Snapshot(path) => {
                let (f, t) = read_snapshot(path)?;
                if !f.grid().same_as(&grid) {
                    return Err(CmError::GridMismatch);
                }
                f.require_tag(equation)?;
                Ok((f, t))
            }
        }
    }
}

/// A parsed run configuration file.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub extract: ExtractConfig,
    pub initial: InitialSpec,
    pub out_dir: PathBuf,
}

fn parse_equation(s: &str) -> Option<GaugeTag> {
    match s {
        "ungauged" | "cm-dnls" | "CM-DNLS" => Some(GaugeTag::Ungauged),
        "gauged" | "g-cm" | "G-CM" => Some(GaugeTag::Gauged),
        _ => None,
    }
}

/// Parses `key = value` lines with `#` comments. Every problem found is
/// reported in one [`CmError::Config`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut errs = Vec::new();
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let Some((k, v)) = line.split_once('=') else {
            errs.push(format!("line {lineno}: expected 'key = value'"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            errs.push(format!("line {lineno}: unknown key '{k}'"));
            continue;
        }
        if kv.insert(k.to_string(), (lineno, v.to_string())).is_some() {
            errs.push(format!("line {lineno}: duplicate key '{k}'"));
        }
    }
    for k in ["equation", "n", "L", "initial", "out_dir"] {
        if !kv.contains_key(k) {
            errs.push(format!("missing required key '{k}'"));
        }
    }

    let get = |k: &str| kv.get(k).map(|(l, v)| (*l, v.as_str()));
    let num = |k: &str, errs: &mut Vec<String>| -> Option<f64> {
        let (l, v) = get(k)?;
        match v.parse::<f64>() {
            Ok(x) => Some(x),
            Err(_) => {
                errs.push(format!("line {l}: {k} = '{v}' is not a number"));
                None
            }
        }
    };
    let equation = get("equation").and_then(|(l, v)| {
        let e = parse_equation(v);
        if e.is_none() {
            errs.push(format!("line {l}: equation = '{v}' (expected ungauged or gauged)"));
        }
        e
    });
    let n = get("n").and_then(|(l, v)| match v.parse::<usize>() {
        Ok(n) => Some(n),
        Err(_) => {
            errs.push(format!("line {l}: n = '{v}' is not a positive integer"));
            None
        }
    });
    let half = num("L", &mut errs);
    let grid = match (n, half) {
        (Some(n), Some(l)) => match Grid1D::new(n, l) {
            Ok(g) => Some(g),
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        },
        _ => None,
    };
    let initial = get("initial").and_then(|(l, v)| match InitialSpec::parse(v) {
        Ok(s) => Some(s),
        Err(e) => {
            errs.push(format!("line {l}: {e}"));
            None
        }
    });
    let mut extract = ExtractConfig::default();
    if let Some(r) = num("R", &mut errs) {
        extract.radius = r;
        if !(r > 0.0) {
            errs.push(format!("R = {r} must be positive"));
        }
    }
    if let Some(t) = num("theta", &mut errs) {
        extract.theta = t;
        if !(t > 0.0) {
            errs.push(format!("theta = {t} must be positive"));
        }
    }
    if let Some(a) = num("alpha_star", &mut errs) {
        extract.alpha_star = a;
        if !(a > 0.0) {
            errs.push(format!("alpha_star = {a} must be positive"));
        }
    }
    let fields: Vec<(&str, Option<f64>)> = ["dt_max", "c_cfl", "c_lambda", "t_end", "hstop", "dealias", "output_every"]
        .into_iter()
        .map(|k| (k, num(k, &mut errs)))
        .collect();
    let out_dir = get("out_dir").map(|(_, v)| PathBuf::from(v));

    let sim = match (equation, grid) {
        (Some(eq), Some(g)) => {
            let mut sim = SimConfig::new(eq, g);
            for (k, v) in &fields {
                let Some(v) = *v else { continue };
                match *k {
                    "dt_max" => sim.dt_max = v,
                    "c_cfl" => sim.c_cfl = v,
                    "c_lambda" => sim.c_lambda = v,
                    "t_end" => sim.t_end = v,
                    "hstop" => sim.hstop = v,
                    "dealias" => {
                        if v.fract() != 0.0 || v < 0.0 {
                            errs.push(format!("dealias = {v} must be an integer"));
                        }
                        sim.dealias = v as usize;
                    }
                    "output_every" => sim.output_every = v,
                    _ => unreachable!(),
                }
            }
            if let Some(InitialSpec::S { t0 }) = &initial {
                sim.t_start = *t0;
            }
            if let Err(CmError::Config(e)) = sim.validate() {
                errs.extend(e);
            }
            Some(sim)
        }
        _ => None,
    };
    if !errs.is_empty() {
        return Err(CmError::Config(errs));
    }
    Ok(RunConfig {
        sim: sim.expect("validated"),
        extract,
        initial: initial.expect("validated"),
        out_dir: out_dir.expect("validated"),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text)
}

/// Encodes a snapshot: magic, u32 n, f64 L, f64 t, u8 tag, then
/// interleaved (Re, Im) samples, all little-endian.
pub fn encode_snapshot(f: &Field, t: f64) -> Vec<u8> {
    let g = f.grid();
    let vals = f.values();
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 16 * g.n());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.push(f.tag().code());
    for z in vals.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(Field, f64)> {
    if bytes.len() < SNAPSHOT_HEADER_LEN || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(CmError::Format("not a CMF1 snapshot".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expected = SNAPSHOT_HEADER_LEN + 16 * n;
    if bytes.len() != expected {
        return Err(CmError::Format(format!(
            "snapshot length {} does not match n = {n} (expected {expected})",
            bytes.len()
        )));
    }
    let half = f64_at(bytes, 8);
    let t = f64_at(bytes, 16);
    let tag = GaugeTag::from_code(bytes[24])
        .ok_or_else(|| CmError::Format(format!("unknown gauge tag {}", bytes[24])))?;
    let grid = Grid1D::new(n, half)?;
    let samples = (0..n)
        .map(|j| {
            let at = SNAPSHOT_HEADER_LEN + 16 * j;
            Complex64::new(f64_at(bytes, at), f64_at(bytes, at + 8))
        })
        .collect();
    Ok((Field::from_samples(grid, tag, samples)?, t))
}

pub fn write_snapshot(path: &Path, f: &Field, t: f64) -> Result<()> {
    fs::write(path, encode_snapshot(f, t)).map_err(|e| io_err(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_snapshot(&bytes)
}

/// 17 significant digits; parses back to the same f64.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> CmError {
    CmError::Format(format!("csv: {e}"))
}

/// Per-bubble columns for row `i` of a tracking report, if any.
fn bubble_cells(tracking: Option<&TrackingReport>, i: usize, width: usize) -> Vec<String> {
    let mut cells = vec![String::new(); 4 * width];
    let rep = tracking.and_then(|t| t.rows.get(i)).and_then(|r| r.report.as_ref().ok());
    if let Some(rep) = rep {
        for (j, b) in rep.bubbles.iter().enumerate().take(width) {
            cells[4 * j] = fmt_num(b.params.lambda());
            cells[4 * j + 1] = fmt_num(b.params.gamma());
            cells[4 * j + 2] = fmt_num(b.params.x());
            cells[4 * j + 3] = fmt_num(rep.dichotomy[j]);
        }
    }
    cells
}

/// Renders a trajectory as series CSV. Bubble columns come from `tracking`,
/// whose rows must line up with the snapshots.
pub fn series_csv(traj: &Trajectory, tracking: Option<&TrackingReport>) -> Result<String> {
    let width = tracking
        .map(|t| {
            t.rows
                .iter()
                .filter_map(|r| r.report.as_ref().ok().map(|x| x.bubbles.len()))
                .max()
                .unwrap_or(0)
        })
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = SERIES_BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for j in 1..=width {
        for c in ["lambda", "gamma", "x", "dichotomy"] {
            header.push(format!("{c}_{j}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        let mut row: Vec<String> = [
            s.t,
            s.conserved.mass,
            s.conserved.energy,
            s.conserved.momentum,
            s.virial.v1,
            s.virial.v2,
            s.hnorm,
        ]
        .iter()
        .map(|&x| fmt_num(x))
        .collect();
        row.extend(bubble_cells(tracking, i, width));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CmError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CmError::Format(e.to_string()))
}

/// A series file read back: header and rows, with empty cells as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Series {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn parse_series(text: &str) -> Result<Series> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.len() < SERIES_BASE_COLUMNS.len() || header[..7] != SERIES_BASE_COLUMNS {
        return Err(CmError::Format("series header does not start with the base columns".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|_| CmError::Format(format!("bad number '{c}' in series")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Series { header, rows })
}

pub fn write_series(path: &Path, traj: &Trajectory, tracking: Option<&TrackingReport>) -> Result<()> {
    fs::write(path, series_csv(traj, tracking)?).map_err(|e| io_err(path, e))
}

pub fn read_series(path: &Path) -> Result<Series> {
    parse_series(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

/// Machine report in long form: `section,index,name,value`.
pub fn report_csv(report: &DecompositionReport, ungauged: Option<&UngaugedReport>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "index", "name", "value"]).map_err(csv_err)?;
    let mut put = |s: &str, i: usize, name: &str, v: String| w.write_record([s, &i.to_string(), name, &v]);
    let mut run = || -> std::result::Result<(), csv::Error> {
        put("summary", 0, "count", report.count().to_string())?;
        put("summary", 0, "mass", fmt_num(report.mass))?;
        put("summary", 0, "max_allowed", report.max_allowed.to_string())?;
        put("summary", 0, "theta", fmt_num(report.theta))?;
        put("summary", 0, "R", fmt_num(report.radius))?;
        for (j, b) in report.bubbles.iter().enumerate() {
            let k = j + 1;
            put("bubble", k, "lambda", fmt_num(b.params.lambda()))?;
            put("bubble", k, "gamma", fmt_num(b.params.gamma()))?;
            put("bubble", k, "x", fmt_num(b.params.x()))?;
            put("bubble", k, "dichotomy", fmt_num(report.dichotomy[j]))?;
            put("bubble", k, "eps_norm", fmt_num(b.eps_norm))?;
            put("bubble", k, "eps_norm_R", fmt_num(b.eps_norm_truncated))?;
            put("bubble", k, "iterations", b.iterations.to_string())?;
            if let Some(r) = report.bubbling[j].ratio {
                put("bubble", k, "bubbling_ratio", fmt_num(r))?;
            }
        }
        for l in &report.ledger {
            put("ledger", l.level, "expected", fmt_num(l.expected))?;
            put("ledger", l.level, "radiation_mass", fmt_num(l.radiation_mass))?;
            put("ledger", l.level, "defect", fmt_num(l.defect))?;
        }
        for s in &report.separations {
            let name = format!("ratio_{}_{}", s.i + 1, s.j + 1);
            put("separation", 0, &name, fmt_num(s.ratio))?;
        }
        if let Some(u) = ungauged {
            for (j, s) in u.solitons.iter().enumerate() {
                let k = j + 1;
                put("ungauged", k, "lambda", fmt_num(s.params.lambda()))?;
                put("ungauged", k, "gamma", fmt_num(s.params.gamma()))?;
                put("ungauged", k, "x", fmt_num(s.params.x()))?;
                put("ungauged", k, "radiation_phase", fmt_num(s.radiation_phase))?;
                put("ungauged", k, "pair_phase", fmt_num(s.pair_phase))?;
            }
        }
        Ok(())
    };
    run().map_err(csv_err)?;
    let bytes = w.into_inner().map_err(|e| CmError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CmError::Format(e.to_string()))
}
