//! Configuration and command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then an optional
//! `key = value` file, then flags), runs one experiment and writes a single
//! CSV or JSON document. CSV files start with `#` comment lines echoing the
//! tool version and the full configuration; JSON documents carry the same
//! echo under `meta`. The only run-dependent line is the timestamp, which
//! `--no-timestamp` removes.
//!
//! Verdicts (positivity, agreement, trends) are part of the document; they
//! do not change the exit code, except for `selftest`. Exit codes: 0
//! success, 1 invalid input, 2 numerical failure or a failed self-test (a
//! diagnostic JSON object is written to standard error for 1 and 2).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{busemann_estimate, cone_probe, cone_trends, nonproper_certificate};
use crate::cover::{distance_axis_to_point, grid_distance_oracle, StripPoint};
use crate::curvature::{default_angles, positivity_scan, ricci_closed, ricci_fd_oracle, RadiusGrid, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::geodesic::{clairaut, half_oscillation, trace, Classification, StripState};
use crate::warp::{Warp, WarpFamily};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Closed-form vs oracle agreement: relative error, or absolute error for
/// values below [`ORACLE_ABS_FLOOR`].
pub const ORACLE_REL_TOL: f64 = 1e-4;
pub const ORACLE_ABS_TOL: f64 = 1e-7;
pub const ORACLE_ABS_FLOOR: f64 = 1e-3;
/// Allowed Clairaut drift over a trace.
pub const CLAIRAUT_BUDGET: f64 = 1e-8;
/// Allowed one-step rise in the cone-probe trends.
pub const CONE_STEP_TOL: f64 = 1e-3;

// ---------------------------------------------------------------------------
// RunConfig

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: WarpFamily,
    pub k: usize,
    pub integrator_tol: f64,
    pub quad_tol: f64,
    pub table_tol: f64,
    /// Tabulation radius for theorem-a; `None` sizes it from the experiment.
    pub r_max: Option<f64>,
    pub oracle_step: f64,
    pub grid_divisions: usize,
    pub scan_start: f64,
    pub scan_end: f64,
    pub scan_step: f64,
    pub radii: Vec<f64>,
    pub spot_checks: usize,
    pub seed: u64,
    pub r0: f64,
    pub y0: f64,
    /// Launch angle in degrees from the parallel.
    pub angle: f64,
    pub length: f64,
    pub launch_count: usize,
    pub l: i64,
    pub l_min: i64,
    pub l_max: i64,
    pub t: f64,
    pub t_list: Vec<f64>,
    pub t_max: f64,
    pub epsilon: f64,
    /// 0 uses every available processor.
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: WarpFamily::TheoremB,
            k: 15,
            integrator_tol: 1e-10,
            quad_tol: 1e-9,
            table_tol: 1e-10,
            r_max: None,
            oracle_step: crate::curvature::DEFAULT_ORACLE_STEP,
            grid_divisions: 200,
            scan_start: 0.0,
            scan_end: 100.0,
            scan_step: 0.1,
            radii: vec![0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0],
            spot_checks: 0,
            seed: 0,
            r0: 0.0,
            y0: 0.0,
            angle: 60.0,
            length: 1000.0,
            launch_count: 20,
            l: 1,
            l_min: 1,
            l_max: 8,
            t: 0.0,
            t_list: vec![10.0, 100.0, 1000.0],
            t_max: 1000.0,
            epsilon: 16.0,
            threads: 0,
            output: None,
        }
    }
}

/// Keys in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "family",
    "k",
    "integrator_tol",
    "quad_tol",
    "table_tol",
    "r_max",
    "oracle_step",
    "grid_divisions",
    "scan_start",
    "scan_end",
    "scan_step",
    "radii",
    "spot_checks",
    "seed",
    "r0",
    "y0",
    "angle",
    "length",
    "launch_count",
    "l",
    "l_min",
    "l_max",
    "t",
    "t_list",
    "t_max",
    "epsilon",
    "threads",
    "output",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{}'", v.trim())))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// Shortest round-trip decimal form.
fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "family" | "warp" => self.family = v.parse()?,
            "k" => self.k = parse_num(key, v)?,
            "integrator_tol" => self.integrator_tol = parse_num(key, v)?,
            "quad_tol" => self.quad_tol = parse_num(key, v)?,
            "table_tol" => self.table_tol = parse_num(key, v)?,
            "r_max" => self.r_max = if v == "auto" { None } else { Some(parse_num(key, v)?) },
            "oracle_step" => self.oracle_step = parse_num(key, v)?,
            "grid_divisions" => self.grid_divisions = parse_num(key, v)?,
            "scan_start" => self.scan_start = parse_num(key, v)?,
            "scan_end" => self.scan_end = parse_num(key, v)?,
            "scan_step" => self.scan_step = parse_num(key, v)?,
            "radii" => self.radii = parse_list(key, v)?,
            "spot_checks" => self.spot_checks = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "r0" => self.r0 = parse_num(key, v)?,
            "y0" => self.y0 = parse_num(key, v)?,
            "angle" => self.angle = parse_num(key, v)?,
            "length" => self.length = parse_num(key, v)?,
            "launch_count" => self.launch_count = parse_num(key, v)?,
            "l" => self.l = parse_num(key, v)?,
            "l_min" | "lmin" => self.l_min = parse_num(key, v)?,
            "l_max" | "lmax" => self.l_max = parse_num(key, v)?,
            "t" => self.t = parse_num(key, v)?,
            "t_list" => self.t_list = parse_list(key, v)?,
            "t_max" | "tmax" => self.t_max = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_num(key, v)?,
            "threads" => self.threads = parse_num(key, v)?,
            "output" => {
                self.output = if v == "-" || v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Textual value of a key, as written by [`RunConfig::echo`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "family" => self.family.to_string(),
            "k" => self.k.to_string(),
            "integrator_tol" => fmt_f64(self.integrator_tol),
            "quad_tol" => fmt_f64(self.quad_tol),
            "table_tol" => fmt_f64(self.table_tol),
            "r_max" => self.r_max.map_or_else(|| "auto".into(), fmt_f64),
            "oracle_step" => fmt_f64(self.oracle_step),
            "grid_divisions" => self.grid_divisions.to_string(),
            "scan_start" => fmt_f64(self.scan_start),
            "scan_end" => fmt_f64(self.scan_end),
            "scan_step" => fmt_f64(self.scan_step),
            "radii" => fmt_list(&self.radii),
            "spot_checks" => self.spot_checks.to_string(),
            "seed" => self.seed.to_string(),
            "r0" => fmt_f64(self.r0),
            "y0" => fmt_f64(self.y0),
            "angle" => fmt_f64(self.angle),
            "length" => fmt_f64(self.length),
            "launch_count" => self.launch_count.to_string(),
            "l" => self.l.to_string(),
            "l_min" => self.l_min.to_string(),
            "l_max" => self.l_max.to_string(),
            "t" => fmt_f64(self.t),
            "t_list" => fmt_list(&self.t_list),
            "t_max" => fmt_f64(self.t_max),
            "epsilon" => fmt_f64(self.epsilon),
            "threads" => self.threads.to_string(),
            "output" => self
                .output
                .as_ref()
                .map_or_else(|| "-".into(), |p| p.display().to_string()),
            _ => return None,
        })
    }

    /// `(key, value)` pairs in [`CONFIG_KEYS`] order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("listed key")))
            .collect()
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected 'key = value'", no + 1)));
            };
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("integrator_tol", self.integrator_tol),
            ("quad_tol", self.quad_tol),
            ("table_tol", self.table_tol),
            ("oracle_step", self.oracle_step),
            ("scan_step", self.scan_step),
            ("length", self.length),
            ("t_max", self.t_max),
            ("epsilon", self.epsilon),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be > 0, got {v}")));
            }
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be >= 2, got {}", self.k)));
        }
        if let Some(r) = self.r_max {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("r_max must be > 0, got {r}")));
            }
        }
        if self.scan_start < 0.0 || self.scan_end < self.scan_start {
            return Err(Error::Config(
                "scan range must satisfy 0 <= scan_start <= scan_end".into(),
            ));
        }
        if self.t < 0.0
            || self
                .radii
                .iter()
                .chain(&self.t_list)
                .any(|&r| !(r.is_finite() && r >= 0.0))
        {
            return Err(Error::Config("radii, t and t_list must be finite and >= 0".into()));
        }
        if self.l_min < 0 || self.l_max < self.l_min || self.l < 0 {
            return Err(Error::Config(
                "orbit indices must satisfy 0 <= l_min <= l_max and l >= 0".into(),
            ));
        }
        if self.grid_divisions == 1 {
            return Err(Error::Config("grid_divisions must be 0 (off) or >= 2".into()));
        }
        Ok(())
    }

    /// Largest radius an experiment with this configuration may touch.
    fn reach(&self) -> f64 {
        let t_top = self.t_list.iter().copied().fold(self.t.max(self.t_max), f64::max);
        let r_top = self.radii.iter().copied().fold(self.scan_end, f64::max);
        let orbit = 2.0 * PI * self.l.max(self.l_max).max(1) as f64;
        [t_top, r_top, self.r0.abs() + self.length, orbit]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// The warp pair; theorem-a tables default to four times [`reach`].
    pub fn warp(&self) -> Result<Warp> {
        match self.family {
            WarpFamily::TheoremA => {
                let r_max = self.r_max.unwrap_or_else(|| (4.0 * self.reach()).max(100.0));
                Warp::theorem_a(r_max, self.table_tol)
            }
            WarpFamily::TheoremB => Ok(Warp::theorem_b()),
            WarpFamily::Flat { fiber } => Warp::flat(fiber),
        }
    }
}

/// Read a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    RunConfig::parse_str(&text)
}

// ---------------------------------------------------------------------------
// Argument parsing

#[derive(Debug, Parser)]
#[command(name = "warplab", version, about = "Numerical laboratory for doubly warped products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Omit the timestamp line from the output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Default, clap::Args)]
struct Overrides {
    /// theorem-a, theorem-b or flat:<c>.
    #[arg(long, global = true)]
    warp: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    integrator_tol: Option<String>,
    #[arg(long, global = true)]
    quad_tol: Option<String>,
    #[arg(long, global = true)]
    table_tol: Option<String>,
    #[arg(long, global = true)]
    r_max: Option<String>,
    #[arg(long, global = true)]
    oracle_step: Option<String>,
    #[arg(long, global = true)]
    grid_divisions: Option<String>,
    #[arg(long, global = true)]
    scan_start: Option<String>,
    #[arg(long, global = true)]
    scan_end: Option<String>,
    #[arg(long, global = true)]
    scan_step: Option<String>,
    /// Comma-separated radii.
    #[arg(long, global = true)]
    radii: Option<String>,
    #[arg(long, global = true)]
    spot_checks: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    r0: Option<String>,
    #[arg(long, global = true)]
    y0: Option<String>,
    /// Launch angle in degrees from the parallel.
    #[arg(long, global = true)]
    angle: Option<String>,
    #[arg(long, global = true)]
    length: Option<String>,
    #[arg(long, global = true)]
    launch_count: Option<String>,
    #[arg(long, global = true)]
    l: Option<String>,
    #[arg(long, global = true)]
    lmin: Option<String>,
    #[arg(long, global = true)]
    lmax: Option<String>,
    #[arg(long, global = true)]
    t: Option<String>,
    /// Comma-separated radii along the ray.
    #[arg(long, global = true)]
    t_list: Option<String>,
    #[arg(long, global = true)]
    tmax: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Worker threads (0 = all processors).
    #[arg(long, global = true)]
    threads: Option<String>,
    /// Output file ('-' for standard output).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Any configuration key as key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let pairs = [
            ("family", &self.warp),
            ("k", &self.k),
            ("integrator_tol", &self.integrator_tol),
            ("quad_tol", &self.quad_tol),
            ("table_tol", &self.table_tol),
            ("r_max", &self.r_max),
            ("oracle_step", &self.oracle_step),
            ("grid_divisions", &self.grid_divisions),
            ("scan_start", &self.scan_start),
            ("scan_end", &self.scan_end),
            ("scan_step", &self.scan_step),
            ("radii", &self.radii),
            ("spot_checks", &self.spot_checks),
            ("seed", &self.seed),
            ("r0", &self.r0),
            ("y0", &self.y0),
            ("angle", &self.angle),
            ("length", &self.length),
            ("launch_count", &self.launch_count),
            ("l", &self.l),
            ("l_min", &self.lmin),
            ("l_max", &self.lmax),
            ("t", &self.t),
            ("t_list", &self.t_list),
            ("t_max", &self.tmax),
            ("epsilon", &self.epsilon),
            ("threads", &self.threads),
            ("output", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Closed-form Ricci curvatures over a radius grid (CSV).
    CurvatureScan,
    /// Closed form against the finite-difference oracle (CSV).
    CurvatureOracle,
    /// Trace one strip geodesic (CSV).
    GeodesicTrace,
    /// Clairaut drift and turning radii over a fan of launches (JSON).
    ClairautCheck,
    /// One covering-space distance d(γˡp̃, (t, 0)) (JSON).
    Distance,
    /// Distances for l in [lmin, lmax] (CSV).
    DistanceTable,
    /// Busemann estimates at the orbit points (CSV).
    Busemann,
    /// Non-properness certificate for l = 1, 2, 4, …, lmax (JSON).
    NonproperCertify,
    /// Cone probe for l = 1, 2, 4, …, lmax (CSV).
    ConeProbe,
    /// Flat-family sanity suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CurvatureScan => "curvature-scan",
            Command::CurvatureOracle => "curvature-oracle",
            Command::GeodesicTrace => "geodesic-trace",
            Command::ClairautCheck => "clairaut-check",
            Command::Distance => "distance",
            Command::DistanceTable => "distance-table",
            Command::Busemann => "busemann",
            Command::NonproperCertify => "nonproper-certify",
            Command::ConeProbe => "cone-probe",
            Command::Selftest => "selftest",
        }
    }
}

// ---------------------------------------------------------------------------
// Output

/// A finished document, and whether its checks passed.
struct Document {
    text: String,
    /// Only the self-test turns a failed check into an exit code.
    ok: bool,
}

struct Meta<'a> {
    command: &'static str,
    cfg: &'a RunConfig,
    timestamp: Option<u64>,
}

impl Meta<'_> {
    fn csv_header(&self) -> String {
        let mut s = format!("# warplab {VERSION} {}\n", self.command);
        if let Some(ts) = self.timestamp {
            let _ = writeln!(s, "# generated_at_unix = {ts}");
        }
        for (k, v) in self.cfg.echo() {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }

    fn json(&self, result: Value, ok: bool) -> Result<String> {
        let config: serde_json::Map<String, Value> = self
            .cfg
            .echo()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect();
        let mut meta = json!({
            "tool": "warplab",
            "version": VERSION,
            "command": self.command,
            "config": config,
        });
        if let Some(ts) = self.timestamp {
            meta["generated_at_unix"] = json!(ts);
        }
        let doc = json!({ "meta": meta, "ok": ok, "result": result });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

// ---------------------------------------------------------------------------
// Subcommands

fn curvature_scan(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let grid = RadiusGrid::new(cfg.scan_start, cfg.scan_end, cfg.scan_step)?;
    let rep = positivity_scan(warp, cfg.k, grid, DEFAULT_MARGIN)?;
    let mut s = meta.csv_header();
    s.push_str("r,ricHH,ricUU,ricVV,family,k\n");
    for x in &rep.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(x.r),
            num(x.ric_hh),
            num(x.ric_uu),
            num(x.ric_vv),
            warp.family(),
            x.k
        );
    }
    let _ = writeln!(
        s,
        "# verdict = {}; min ricHH = {} at r = {}; min ricUU = {} at r = {}; min ricVV = {} at r = {}",
        if rep.positive { "positive" } else { "not positive" },
        num(rep.min_hh.value),
        fmt_f64(rep.min_hh.r),
        num(rep.min_uu.value),
        fmt_f64(rep.min_uu.r),
        num(rep.min_vv.value),
        fmt_f64(rep.min_vv.r),
    );
    Ok(Document {
        text: s,
        ok: rep.positive,
    })
}

/// Relative error, or absolute error when the closed form is tiny.
pub fn oracle_error(closed: f64, oracle: f64) -> (f64, bool) {
    if closed.abs() < ORACLE_ABS_FLOOR {
        let e = (oracle - closed).abs();
        (e, e <= ORACLE_ABS_TOL)
    } else {
        let e = ((oracle - closed) / closed).abs();
        (e, e <= ORACLE_REL_TOL)
    }
}

fn curvature_oracle(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let mut radii = cfg.radii.clone();
    if cfg.spot_checks > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let lo = cfg.scan_start.max(10.0 * cfg.oracle_step);
        let hi = cfg.scan_end.max(lo);
        radii.extend((0..cfg.spot_checks).map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo }));
    }
    let angles = default_angles(cfg.k);
    let mut s = meta.csv_header();
    s.push_str("r,closed_HH,oracle_HH,err_HH,closed_UU,oracle_UU,err_UU,closed_VV,oracle_VV,err_VV,pass\n");
    let mut ok = true;
    let mut worst = 0.0f64;
    for &r in &radii {
        let closed = ricci_closed(&warp.sample(r)?, cfg.k)?.components();
        let oracle = ricci_fd_oracle(warp, cfg.k, r, &angles, cfg.oracle_step)?
            .ricci
            .components();
        let _ = write!(s, "{}", num(r));
        let mut row_ok = true;
        for i in 0..3 {
            let (e, pass) = oracle_error(closed[i], oracle[i]);
            row_ok &= pass;
            worst = worst.max(e);
            let _ = write!(s, ",{},{},{}", num(closed[i]), num(oracle[i]), num(e));
        }
        let _ = writeln!(s, ",{row_ok}");
        ok &= row_ok;
    }
    let _ = writeln!(
        s,
        "# verdict = {}; worst error = {}",
        if ok { "agree" } else { "disagree" },
        num(worst)
    );
    Ok(Document { text: s, ok })
}

fn geodesic_trace(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let start = StripState::launch(warp, cfg.r0, cfg.y0, cfg.angle.to_radians())?;
    let path = trace(warp, start, cfg.length, cfg.integrator_tol)?;
    let mut s = meta.csv_header();
    s.push_str("s,r,y,dr,dy,J_drift\n");
    for p in &path.samples {
        let x = p.state;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(p.s),
            num(x.r),
            num(x.y),
            num(x.dr),
            num(x.dy),
            num(p.j_drift)
        );
    }
    let class = match &path.class {
        Some(Classification::RadialRay) => "radial-ray".to_string(),
        Some(Classification::AxisClosed) => "axis-closed".to_string(),
        Some(Classification::Oscillating(o)) => format!("oscillating r* = {}", num(o.r_star)),
        None => "unclassified".to_string(),
    };
    let _ = writeln!(
        s,
        "# J = {}; max J drift = {}; turning points = {}; axis crossings = {}; class = {class}",
        num(path.j),
        num(path.max_j_drift),
        path.turning_points.len(),
        path.axis_crossings.len()
    );
    Ok(Document { text: s, ok: true })
}

#[derive(Serialize)]
struct LaunchCheck {
    angle_deg: f64,
    j: f64,
    max_j_drift: f64,
    budget: f64,
    max_speed_defect: f64,
    /// Turning radius from the quadrature (absent for non-oscillating launches).
    r_star: Option<f64>,
    /// Largest deviation of a located turning point from `r_star`.
    turning_error: Option<f64>,
    turning_points: usize,
    pass: bool,
}

fn clairaut_check(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let n = cfg.launch_count.max(1);
    let checks = (0..n)
        .map(|i| {
            let angle_deg = 90.0 * (i as f64 + 0.5) / n as f64;
            let start = StripState::launch(warp, cfg.r0, cfg.y0, angle_deg.to_radians())?;
            let path = trace(warp, start, cfg.length, cfg.integrator_tol)?;
            let j = clairaut(warp, &start)?;
            let r_star = if warp.decays() && cfg.r0 == 0.0 && j.abs() < warp.h0() {
                half_oscillation(warp, j, cfg.quad_tol).ok().map(|o| o.r_star)
            } else {
                None
            };
            let turning_error = r_star.and_then(|rs| {
                path.turning_points
                    .iter()
                    .map(|t| (t.state.r.abs() - rs).abs())
                    .reduce(f64::max)
            });
            let budget = CLAIRAUT_BUDGET * (1.0 + j.abs());
            Ok(LaunchCheck {
                angle_deg,
                j,
                max_j_drift: path.max_j_drift,
                budget,
                max_speed_defect: path.max_speed_defect,
                r_star,
                turning_error,
                turning_points: path.turning_points.len(),
                pass: path.max_j_drift <= budget && turning_error.is_none_or(|e| e <= 1e-6),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = checks.iter().all(|c| c.pass);
    let max_drift = checks.iter().map(|c| c.max_j_drift).fold(0.0, f64::max);
    let result = json!({
        "family": warp.family().to_string(),
        "length": cfg.length,
        "max_j_drift": max_drift,
        "launches": to_value(&checks)?,
    });
    Ok(Document {
        text: meta.json(result, ok)?,
        ok,
    })
}

fn distance_cmd(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let d = distance_axis_to_point(warp, cfg.l, cfg.t, cfg.quad_tol)?;
    let grid = if cfg.grid_divisions >= 2 && d.value > 0.0 {
        let target = StripPoint::new(cfg.t, 2.0 * PI * cfg.l as f64)?;
        match grid_distance_oracle(warp, StripPoint::BASE, target, d.value / cfg.grid_divisions as f64) {
            Ok(g) => Some(g),
            Err(Error::WindowTooSmall) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let result = json!({
        "l": cfg.l,
        "t": cfg.t,
        "distance": to_value(&d)?,
        "grid_oracle": grid,
        "sandwich_upper": cfg.t + 2.0 * PI * cfg.l as f64 * warp.h(cfg.t)?,
    });
    Ok(Document {
        text: meta.json(result, !d.degraded)?,
        ok: !d.degraded,
    })
}

fn distance_table(meta: &Meta, warp: &Warp) -> Result<Document> {
    use rayon::prelude::*;
    let cfg = meta.cfg;
    let rows = (cfg.l_min..=cfg.l_max)
        .into_par_iter()
        .map(|l| distance_axis_to_point(warp, l, cfg.t, cfg.quad_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut s = meta.csv_header();
    s.push_str("l,L,lower,upper,method,n,J,r_star\n");
    for (l, d) in (cfg.l_min..=cfg.l_max).zip(&rows) {
        let g = d.geodesic;
        let _ = writeln!(
            s,
            "{l},{},{},{},{},{},{},{}",
            num(d.value),
            num(d.lower_bound),
            num(d.upper_bound),
            d.method,
            g.map_or_else(String::new, |g| g.n.to_string()),
            opt_num(g.map(|g| g.j)),
            opt_num(g.and_then(|g| g.r_star)),
        );
    }
    let ok = rows.iter().all(|d| !d.degraded);
    Ok(Document { text: s, ok })
}

fn busemann_cmd(meta: &Meta, warp: &Warp) -> Result<Document> {
    use rayon::prelude::*;
    let cfg = meta.cfg;
    let series = (cfg.l_min..=cfg.l_max)
        .into_par_iter()
        .map(|l| busemann_estimate(warp, l, &cfg.t_list, cfg.quad_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut s = meta.csv_header();
    s.push_str("l,T,b_hat_low,b_hat_high,bound_low,b_hat\n");
    let mut ok = true;
    for se in &series {
        ok &= se.monotone;
        for r in &se.rows {
            ok &= r.b_low >= r.bound_low && r.b_high <= 0.0;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                se.l,
                num(r.t),
                num(r.b_low),
                num(r.b_high),
                num(r.bound_low),
                opt_num(r.b_hat)
            );
        }
    }
    let _ = writeln!(
        s,
        "# verdict = {}",
        if ok {
            "monotone within the sandwich"
        } else {
            "violation"
        }
    );
    Ok(Document { text: s, ok })
}

fn dyadic(l_max: i64) -> Vec<i64> {
    std::iter::successors(Some(1i64), |&l| l.checked_mul(2))
        .take_while(|&l| l <= l_max)
        .collect()
}

fn nonproper_cmd(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let cert = nonproper_certificate(warp, &dyadic(cfg.l_max), cfg.t_max, cfg.epsilon, cfg.quad_tol)?;
    let ok = cert.verdict == "non-proper evidence";
    Ok(Document {
        text: meta.json(to_value(&cert)?, ok)?,
        ok,
    })
}

fn cone_cmd(meta: &Meta, warp: &Warp) -> Result<Document> {
    let cfg = meta.cfg;
    let rows = cone_probe(warp, &dyadic(cfg.l_max), cfg.quad_tol)?;
    let trends = cone_trends(&rows, CONE_STEP_TOL);
    let mut s = meta.csv_header();
    s.push_str("l,L,R,R_over_L,A\n");
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.l,
            num(r.length),
            num(r.radius),
            num(r.radius_over_length),
            num(r.additivity)
        );
    }
    let _ = writeln!(
        s,
        "# A <= 1: {}; 1 - A non-increasing: {}; R/L non-increasing: {}; R/L final < initial: {}; R <= L/2: {}",
        trends.additivity_at_most_one,
        trends.defect_non_increasing,
        trends.ratio_non_increasing,
        trends.ratio_final_below_initial,
        trends.radius_within_half_length
    );
    Ok(Document {
        text: s,
        ok: trends.all(),
    })
}

/// Flat-strip sanity checks as `(name, passed, detail)`.
pub fn selftest_checks(k: usize) -> Result<Vec<(String, bool, String)>> {
    let w = Warp::flat(1.0)?;
    let mut out = Vec::new();
    let angles = default_angles(k);
    for r in [0.5, 1.0, 5.0] {
        let o = ricci_fd_oracle(&w, k, r, &angles, crate::curvature::DEFAULT_ORACLE_STEP)?;
        let worst = o.ricci.components().iter().map(|v| v.abs()).fold(0.0, f64::max);
        out.push((
            format!("flat oracle at r = {r}"),
            worst <= 1e-7,
            format!("max |Ric| = {worst:e}"),
        ));
        let c = ricci_closed(&w.sample(r)?, k)?;
        let worst = c.components().iter().map(|v| v.abs()).fold(0.0, f64::max);
        out.push((
            format!("flat closed form at r = {r}"),
            worst == 0.0,
            format!("max |Ric| = {worst:e}"),
        ));
    }
    for (r, y) in [(0.0, 7.0), (1.0, 0.3), (2.0, 1.1), (0.5, 3.0), (3.0, 3.0)] {
        let exact = f64::hypot(r, y);
        let b = StripPoint::new(r, y)?;
        let g = grid_distance_oracle(&w, StripPoint::BASE, b, exact / 200.0)?;
        let rel = (g - exact) / exact;
        out.push((
            format!("flat grid distance to r={r} y={y}"),
            rel.abs() <= 0.02,
            format!("relative error {rel:e}"),
        ));
        let d = crate::cover::distance(&w, StripPoint::BASE, b, 1e-9)?.value;
        out.push((
            format!("flat solver distance to r={r} y={y}"),
            (d - exact).abs() <= 1e-8,
            format!("error {:e}", d - exact),
        ));
    }
    Ok(out)
}

fn selftest(meta: &Meta) -> Result<Document> {
    let checks = selftest_checks(meta.cfg.k.min(crate::curvature::ORACLE_MAX_K))?;
    let mut s = meta.csv_header();
    s.push_str("check,pass,detail\n");
    for (name, pass, detail) in &checks {
        let _ = writeln!(s, "{name},{},{detail}", if *pass { "PASS" } else { "FAIL" });
    }
    Ok(Document {
        text: s,
        ok: checks.iter().all(|c| c.1),
    })
}

fn execute(command: Command, meta: &Meta) -> Result<Document> {
    if let Command::Selftest = command {
        return selftest(meta);
    }
    let warp = meta.cfg.warp()?;
    match command {
        Command::CurvatureScan => curvature_scan(meta, &warp),
        Command::CurvatureOracle => curvature_oracle(meta, &warp),
        Command::GeodesicTrace => geodesic_trace(meta, &warp),
        Command::ClairautCheck => clairaut_check(meta, &warp),
        Command::Distance => distance_cmd(meta, &warp),
        Command::DistanceTable => distance_table(meta, &warp),
        Command::Busemann => busemann_cmd(meta, &warp),
        Command::NonproperCertify => nonproper_cmd(meta, &warp),
        Command::ConeProbe => cone_cmd(meta, &warp),
        Command::Selftest => unreachable!(),
    }
}

fn diagnostic(err: &mut dyn Write, kind: &str, message: &str) {
    let v = json!({ "error": kind, "message": message });
    let _ = writeln!(err, "{v}");
}

fn fail(err: &mut dyn Write, e: &Error) -> i32 {
    diagnostic(err, e.kind(), &e.to_string());
    if e.is_input_error() {
        1
    } else {
        2
    }
}

/// Run the command line `args` (including the program name). The document
/// goes to `out` unless an output file is configured.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    diagnostic(err, "usage", e.to_string().trim());
                    1
                }
            };
        }
    };
    let cfg = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return fail(err, &e),
    };
    let mut cfg = cfg;
    if let Err(e) = cli.overrides.apply(&mut cfg) {
        return fail(err, &e);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => return fail(err, &Error::Config(format!("thread pool: {e}"))),
    };
    let timestamp = (!cli.no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let meta = Meta {
        command: cli.command.name(),
        cfg: &cfg,
        timestamp,
    };
    let doc = match pool.install(|| execute(cli.command, &meta)) {
        Ok(d) => d,
        Err(e) => return fail(err, &e),
    };
    let written = match &cfg.output {
        Some(path) => std::fs::write(path, &doc.text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => out.write_all(doc.text.as_bytes()).map_err(|e| Error::Io(e.to_string())),
    };
    if let Err(e) = written {
        return fail(err, &e);
    }
    if doc.ok || !matches!(cli.command, Command::Selftest) {
        0
    } else {
        diagnostic(
            err,
            "check_failed",
            &format!("{} reported a failed check", meta.command),
        );
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse_str("").unwrap(), RunConfig::default());
        assert_eq!(
            RunConfig::parse_str("# only a comment\n\n").unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn k_below_two_is_rejected() {
        assert!(matches!(RunConfig::parse_str("k = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::parse_str("colour = blue").is_err());
        assert!(RunConfig::parse_str("k = three").is_err());
        assert!(RunConfig::parse_str("quad_tol = -1").is_err());
        assert!(RunConfig::parse_str("no equals sign").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse_str("integrator_tol = 1e-10\nfamily = flat:2\nt_list = 1, 2.5\nr_max = 50").unwrap();
        assert_eq!(cfg.get("integrator_tol").unwrap(), "1e-10");
        let text: String = cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let back = RunConfig::parse_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.integrator_tol, 1e-10);
    }

    #[test]
    fn number_format_keeps_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn dyadic_lists() {
        assert_eq!(dyadic(32), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(dyadic(5), vec![1, 2, 4]);
        assert!(dyadic(0).is_empty());
    }

    #[test]
    fn oracle_error_switches_to_absolute() {
        assert!(oracle_error(1e-5, 1e-5 + 5e-8).1);
        assert!(!oracle_error(1.0, 1.001).1);
        assert!(oracle_error(1.0, 1.00005).1);
    }
}
