//! Warp function pairs `(f, h)` for the doubly warped metric
//! `dr² + f(r)² ds²_{k-1} + h(r)² ds²_1`.
//!
//! Three families are provided:
//!
//! * [`WarpFamily::TheoremA`]: `h = f'` where `f' = sqrt(1 - φ(f))`, `f(0) = 0`,
//!   and `φ(x) = (√3/π) ∫₀ˣ arctan(u³)/u² du`. The ODE is integrated once into a
//!   [`WarpTable`] and evaluated by quintic Hermite interpolation.
//! * [`WarpFamily::TheoremB`]: `f = √(ln 2)·r / ln^{1/2}(2 + r²)`,
//!   `h = 1 / ln(2 + r²)`, evaluated from the differentiated closed forms.
//! * [`WarpFamily::Flat`]: `f = r`, `h ≡ c`; a zero-curvature sanity family.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::numeric::ode::{StepControl, Stepper};
use crate::numeric::quad::{integrate_scalar, QuadTol};
use crate::numeric::root::invert_decreasing;

/// Below this magnitude removable singularities are evaluated by series.
pub const SERIES_CROSSOVER: f64 = 1e-3;

/// `√3 / π`, the normalisation making `φ(∞) = 1`.
pub const PHI_SCALE: f64 = 1.732_050_807_568_877_2 / PI;

const TABLE_FORMAT: &str = "warplab-warp-table";
const TABLE_VERSION: u32 = 1;

/// Selector for the warp pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WarpFamily {
    TheoremA,
    TheoremB,
    Flat { fiber: f64 },
}

impl WarpFamily {
    /// True for the families whose fiber size `h` decays to zero.
    pub fn decays(&self) -> bool {
        !matches!(self, WarpFamily::Flat { .. })
    }
}

impl fmt::Display for WarpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WarpFamily::TheoremA => write!(f, "theorem-a"),
            WarpFamily::TheoremB => write!(f, "theorem-b"),
            WarpFamily::Flat { fiber } => write!(f, "flat:{fiber}"),
        }
    }
}

impl FromStr for WarpFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "theorem-a" => Ok(WarpFamily::TheoremA),
            "theorem-b" => Ok(WarpFamily::TheoremB),
            other => {
                let Some(c) = other.strip_prefix("flat:") else {
                    return Err(Error::Config(format!(
                        "unknown warp family '{other}' (expected theorem-a, theorem-b or flat:<c>)"
                    )));
                };
                let fiber: f64 = c
                    .parse()
                    .map_err(|_| Error::Config(format!("flat fiber size '{c}' is not a number")))?;
                if !(fiber.is_finite() && fiber > 0.0) {
                    return Err(Error::Config(format!("flat fiber size must be positive, got {fiber}")));
                }
                Ok(WarpFamily::Flat { fiber })
            }
        }
    }
}

/// Quotients of the Ricci formulas that are `0/0` at the origin, evaluated
/// stably (series near `r = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quotients {
    /// `f'' / f`
    pub d2f_over_f: f64,
    /// `(1 - f'²) / f²`
    pub defect_over_f2: f64,
    /// `f' h' / (f h)`
    pub dfdh_over_fh: f64,
}

/// Values and derivatives of the warp pair at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpSample {
    pub r: f64,
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
    /// Only available for the Theorem A pair, where `h = f'`.
    pub d3f: Option<f64>,
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
    pub quotients: Quotients,
}

/// Fiber size of the even extension `h̄(r) = h(|r|)` with two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

// ---------------------------------------------------------------------------
// φ and the Theorem A right-hand side

/// `arctan(u³)/u²`, continuously extended by 0 at the origin.
fn phi_integrand(u: f64) -> f64 {
    if u.abs() < SERIES_CROSSOVER {
        let u3 = u * u * u;
        u - u3 * u3 * u / 3.0
    } else {
        (u * u * u).atan() / (u * u)
    }
}

/// `arctan(f³)/f³` with its limit 1 at the origin.
fn atan_ratio(f: f64) -> f64 {
    if f.abs() < SERIES_CROSSOVER {
        let f6 = f.powi(6);
        1.0 - f6 / 3.0
    } else {
        let f3 = f * f * f;
        f3.atan() / f3
    }
}

/// Derivative of `arctan(f³)/f²` with respect to `f`.
fn phi_integrand_prime(f: f64) -> f64 {
    3.0 / (1.0 + f.powi(6)) - 2.0 * atan_ratio(f)
}

/// `φ(x) = (√3/π) ∫₀ˣ arctan(u³)/u² du`.
///
/// For `x > 1` the tail is mapped through `u = 1/v`, which turns the slowly
/// decaying integrand into the bounded `π/2 - arctan(v³)` on `[1/x, 1]`.
pub fn phi(x: f64, tol: f64) -> Result<f64> {
    finite(x, "phi argument")?;
    finite(tol, "phi tolerance")?;
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!("phi requires x >= 0, got {x}")));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("phi tolerance must be positive".into()));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let qt = QuadTol::new(tol * 0.1, tol * 0.1 / PHI_SCALE);
    let (head, head_err) = integrate_scalar(|u| Ok(phi_integrand(u)), 0.0, x.min(1.0), qt)?;
    let (tail, tail_err) = if x > 1.0 {
        integrate_scalar(|v| Ok(0.5 * PI - (v * v * v).atan()), 1.0 / x, 1.0, qt)?
    } else {
        (0.0, 0.0)
    };
    let err = PHI_SCALE * (head_err + tail_err);
    if err > tol {
        return Err(Error::QuadratureNonConvergence { tol, err });
    }
    Ok(PHI_SCALE * (head + tail))
}

// ---------------------------------------------------------------------------
// Theorem A table

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    r: f64,
    f: f64,
    p: f64,
}

/// Derivative jets of `f` and `P = φ(f)` at a node, recovered from the ODE.
fn jets(f: f64, p: f64) -> Result<([f64; 3], [f64; 3])> {
    let q = 1.0 - p;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvariantViolation(format!(
            "f' = sqrt(1 - P) left (0, 1] (P = {p})"
        )));
    }
    let df = q.sqrt();
    let g = phi_integrand(f);
    let d2f = -0.5 * PHI_SCALE * g;
    let dp = PHI_SCALE * g * df;
    let d2p = PHI_SCALE * (phi_integrand_prime(f) * df * df + g * d2f);
    Ok(([f, df, d2f], [p, dp, d2p]))
}

fn hermite5(y0: [f64; 3], y1: [f64; 3], dx: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
    y0[0] * h0 + dx * y0[1] * h1 + dx * dx * y0[2] * h2 + y1[0] * h3 + dx * y1[1] * h4 + dx * dx * y1[2] * h5
}

/// Tabulated solution of the Theorem A warp ODE on `[0, r_max]`.
///
/// Nodes carry `(r, f, P)`; derivatives at nodes come from the ODE itself, so
/// between nodes both `f` and `P` are quintic Hermite interpolants. The table
/// is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpTable {
    tol: f64,
    r_max: f64,
    nodes: Vec<Node>,
}

/// Default cap on the table step, as a fraction of `1 + r`.
pub const DEFAULT_STEP_SCALE: f64 = 0.01;

/// Integrate `f' = sqrt(1 - P)`, `P' = (√3/π)·arctan(f³)/f²·f'` from
/// `f(0) = P(0) = 0` out to `r_max`.
pub fn build_theorem_a(r_max: f64, tol: f64) -> Result<WarpTable> {
    build_theorem_a_with(r_max, tol, DEFAULT_STEP_SCALE)
}

/// As [`build_theorem_a`] with an explicit step cap `step_scale·(1 + r)`.
pub fn build_theorem_a_with(r_max: f64, tol: f64, step_scale: f64) -> Result<WarpTable> {
    finite(r_max, "r_max")?;
    finite(tol, "table tolerance")?;
    if r_max <= 0.0 || tol <= 0.0 || step_scale <= 0.0 {
        return Err(Error::InvalidArgument(
            "r_max, tolerance and step scale must be positive".into(),
        ));
    }
    let rhs = |_r: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let q = 1.0 - y[1];
        if !(q > 0.0) {
            return Err(Error::InvariantViolation(format!("P = {} reached 1", y[1])));
        }
        let df = q.sqrt();
        Ok([df, PHI_SCALE * phi_integrand(y[0]) * df])
    };
    let mut nodes = vec![Node { r: 0.0, f: 0.0, p: 0.0 }];
    let (mut r, mut y) = (0.0, [0.0, 0.0]);
    let mut h = step_scale * 0.1;
    while r < r_max {
        let cap = step_scale * (1.0 + r);
        let stepper = Stepper::new(StepControl::new(tol, tol * 1e-6).with_h_max(cap));
        let acc = stepper.step(&rhs, r, &y, h, Some(r_max - r))?;
        r = if r_max - r - acc.h <= 1e-12 * r_max {
            r_max
        } else {
            r + acc.h
        };
        y = acc.y;
        h = acc.h_next;
        let df = (1.0 - y[1]).sqrt();
        if !(df > 0.0 && df < 1.0) || y[0] <= nodes.last().map_or(0.0, |n| n.f) {
            return Err(Error::InvariantViolation(format!(
                "Theorem A table at r = {r}: f = {}, f' = {df}",
                y[0]
            )));
        }
        nodes.push(Node { r, f: y[0], p: y[1] });
    }
    Ok(WarpTable { tol, r_max, nodes })
}

impl WarpTable {
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Grid radii in increasing order.
    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.r)
    }

    /// Interpolated `(f, P)` at `r`.
    pub fn f_and_p(&self, r: f64) -> Result<(f64, f64)> {
        finite(r, "radius")?;
        if r < 0.0 || r > self.r_max {
            return Err(Error::OutOfRange { r, r_max: self.r_max });
        }
        let i = match self.nodes.partition_point(|n| n.r <= r) {
            0 => 0,
            k if k >= self.nodes.len() => self.nodes.len() - 2,
            k => k - 1,
        };
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        if r == a.r {
            return Ok((a.f, a.p));
        }
        let dx = b.r - a.r;
        let s = (r - a.r) / dx;
        let (fa, pa) = jets(a.f, a.p)?;
        let (fb, pb) = jets(b.f, b.p)?;
        Ok((hermite5(fa, fb, dx, s), hermite5(pa, pb, dx, s)))
    }

    /// Full warp sample (`h = f'`) at `r`.
    pub fn sample(&self, r: f64) -> Result<WarpSample> {
        let (f, p) = self.f_and_p(r)?;
        Ok(theorem_a_sample(r, f, p))
    }

    /// Write the table as a versioned text artifact.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        writeln!(w, "# {TABLE_FORMAT} v{TABLE_VERSION}").map_err(io)?;
        writeln!(w, "format = {TABLE_FORMAT}").map_err(io)?;
        writeln!(w, "version = {TABLE_VERSION}").map_err(io)?;
        writeln!(w, "family = {}", WarpFamily::TheoremA).map_err(io)?;
        writeln!(w, "tol = {:e}", self.tol).map_err(io)?;
        writeln!(w, "r_max = {:e}", self.r_max).map_err(io)?;
        writeln!(w, "rows = {}", self.nodes.len()).map_err(io)?;
        writeln!(w, "# r f fp P").map_err(io)?;
        for n in &self.nodes {
            let df = (1.0 - n.p).sqrt();
            writeln!(w, "{:.16e} {:.16e} {:.16e} {:.16e}", n.r, n.f, df, n.p).map_err(io)?;
        }
        Ok(())
    }

    /// Read a table written by [`WarpTable::write_to`].
    pub fn read_from<R: BufRead>(reader: R) -> Result<WarpTable> {
        let mut tol = None;
        let mut r_max = None;
        let mut rows = None;
        let mut saw_format = false;
        let mut nodes = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                let num = |v: &str| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad number for {key}: {v}")))
                };
                match key {
                    "format" if value == TABLE_FORMAT => saw_format = true,
                    "format" => return Err(Error::Format(format!("unknown format '{value}'"))),
                    "version" if value == TABLE_VERSION.to_string() => {}
                    "version" => return Err(Error::Format(format!("unsupported version {value}"))),
                    "family" if value == "theorem-a" => {}
                    "family" => return Err(Error::Format(format!("unexpected family {value}"))),
                    "tol" => tol = Some(num(value)?),
                    "r_max" => r_max = Some(num(value)?),
                    "rows" => {
                        rows = Some(
                            value
                                .parse::<usize>()
                                .map_err(|_| Error::Format(format!("bad row count {value}")))?,
                        )
                    }
                    _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
                }
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>().map_err(|_| Error::Format(format!("bad row '{line}'"))))
                .collect::<Result<_>>()?;
            if cols.len() != 4 {
                return Err(Error::Format(format!("expected 4 columns, got {}", cols.len())));
            }
            nodes.push(Node {
                r: cols[0],
                f: cols[1],
                p: cols[3],
            });
        }
        if !saw_format {
            return Err(Error::Format("missing format header".into()));
        }
        let (Some(tol), Some(r_max), Some(rows)) = (tol, r_max, rows) else {
            return Err(Error::Format("incomplete header".into()));
        };
        if rows != nodes.len() || rows < 2 {
            return Err(Error::Format(format!(
                "header announces {rows} rows, found {}",
                nodes.len()
            )));
        }
        if nodes.windows(2).any(|w| w[1].r <= w[0].r) || nodes[0].r != 0.0 {
            return Err(Error::Format("radii must start at 0 and increase".into()));
        }
        Ok(WarpTable { tol, r_max, nodes })
    }
}

fn theorem_a_sample(r: f64, f: f64, p: f64) -> WarpSample {
    let df = (1.0 - p).sqrt();
    let g = phi_integrand(f);
    let d2f = -0.5 * PHI_SCALE * g;
    let d3f = -0.5 * PHI_SCALE * phi_integrand_prime(f) * df;
    let d2f_over_f = -0.5 * PHI_SCALE * atan_ratio(f);
    let defect_over_f2 = if f < SERIES_CROSSOVER {
        PHI_SCALE * (0.5 - f.powi(6) / 24.0)
    } else {
        p / (f * f)
    };
    WarpSample {
        r,
        f,
        df,
        d2f,
        d3f: Some(d3f),
        h: df,
        dh: d2f,
        d2h: d3f,
        quotients: Quotients {
            d2f_over_f,
            defect_over_f2,
            // h = f' makes f'h'/(fh) = f''/f
            dfdh_over_fh: d2f_over_f,
        },
    }
}

// ---------------------------------------------------------------------------
// Theorem B closed forms

/// Closed-form Theorem B warp pair and its first two derivatives.
pub fn eval_theorem_b(r: f64) -> Result<WarpSample> {
    finite(r, "radius")?;
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be >= 0, got {r}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let c = ln2.sqrt();
    let w = 2.0 + r * r;
    let l = w.ln();
    let dl = 2.0 * r / w;
    let d2l = (4.0 - 2.0 * r * r) / (w * w);

    let h = 1.0 / l;
    let dh = -dl / (l * l);
    let d2h = -d2l / (l * l) + 2.0 * dl * dl / (l * l * l);

    let l_m12 = l.powf(-0.5);
    let l_m32 = l_m12 / l;
    let l_m52 = l_m32 / l;
    // sqrt(ln2 / L) is exactly 1 at the origin
    let ratio = (ln2 / l).sqrt();
    let f = r * ratio;
    let df = ratio * (1.0 - 0.5 * r * dl / l);
    let d2f = c * (-l_m32 * dl + 0.75 * r * l_m52 * dl * dl - 0.5 * r * l_m32 * d2l);

    let quotients = if r < SERIES_CROSSOVER {
        // f = r + a r³ + b r⁵, h = h0 + h2 r² + h4 r⁴ around the origin
        let a = -1.0 / (4.0 * ln2);
        let b = 1.0 / (16.0 * ln2) + 3.0 / (32.0 * ln2 * ln2);
        let h2 = -1.0 / (2.0 * ln2 * ln2);
        let h4 = 1.0 / (8.0 * ln2 * ln2) + 1.0 / (4.0 * ln2.powi(3));
        origin_quotients(a, b, h2, h4, r, df, h)
    } else {
        Quotients {
            d2f_over_f: d2f / f,
            defect_over_f2: (1.0 - df) * (1.0 + df) / (f * f),
            dfdh_over_fh: df * dh / (f * h),
        }
    };
    Ok(WarpSample {
        r,
        f,
        df,
        d2f,
        d3f: None,
        h,
        dh,
        d2h,
        quotients,
    })
}

/// Second-order series of the singular quotients for an odd `f` and even `h`.
fn origin_quotients(a: f64, b: f64, h2: f64, h4: f64, r: f64, df: f64, h: f64) -> Quotients {
    let r2 = r * r;
    let dh_over_f = 2.0 * h2 + (4.0 * h4 - 2.0 * a * h2) * r2;
    Quotients {
        d2f_over_f: 6.0 * a + (20.0 * b - 6.0 * a * a) * r2,
        defect_over_f2: -6.0 * a + (3.0 * a * a - 10.0 * b) * r2,
        dfdh_over_fh: df * dh_over_f / h,
    }
}

fn flat_sample(r: f64, fiber: f64) -> WarpSample {
    WarpSample {
        r,
        f: r,
        df: 1.0,
        d2f: 0.0,
        d3f: Some(0.0),
        h: fiber,
        dh: 0.0,
        d2h: 0.0,
        quotients: Quotients {
            d2f_over_f: 0.0,
            defect_over_f2: 0.0,
            dfdh_over_fh: 0.0,
        },
    }
}

// ---------------------------------------------------------------------------
// Uniform accessor

/// A warp family together with whatever data it needs to be evaluated.
///
/// Cloning is cheap; the Theorem A table is shared.
#[derive(Debug, Clone)]
pub struct Warp {
    family: WarpFamily,
    table: Option<Arc<WarpTable>>,
}

/// Largest radius the closed-form families are evaluated at.
const CLOSED_FORM_LIMIT: f64 = 1e100;

impl Warp {
    /// Pair a family with its table. The table is required for Theorem A
    /// and ignored otherwise.
    pub fn new(family: WarpFamily, table: Option<WarpTable>) -> Result<Warp> {
        match family {
            WarpFamily::TheoremA if table.is_none() => Err(Error::InvalidArgument(
                "Theorem A evaluation requires a warp table".into(),
            )),
            WarpFamily::TheoremA => Ok(Warp {
                family,
                table: table.map(Arc::new),
            }),
            WarpFamily::Flat { fiber } if !(fiber.is_finite() && fiber > 0.0) => Err(Error::InvalidArgument(format!(
                "flat fiber size must be positive, got {fiber}"
            ))),
            _ => Ok(Warp { family, table: None }),
        }
    }

    pub fn theorem_a(r_max: f64, tol: f64) -> Result<Warp> {
        Warp::new(WarpFamily::TheoremA, Some(build_theorem_a(r_max, tol)?))
    }

    pub fn theorem_b() -> Warp {
        Warp {
            family: WarpFamily::TheoremB,
            table: None,
        }
    }

    pub fn flat(fiber: f64) -> Result<Warp> {
        Warp::new(WarpFamily::Flat { fiber }, None)
    }

    pub fn family(&self) -> WarpFamily {
        self.family
    }

    pub fn table(&self) -> Option<&WarpTable> {
        self.table.as_deref()
    }

    /// Largest radius at which the pair can be evaluated.
    pub fn r_limit(&self) -> f64 {
        match &self.table {
            Some(t) => t.r_max(),
            None => CLOSED_FORM_LIMIT,
        }
    }

    pub fn decays(&self) -> bool {
        self.family.decays()
    }

    /// Warp sample at `r >= 0`.
    pub fn sample(&self, r: f64) -> Result<WarpSample> {
        finite(r, "radius")?;
        if r < 0.0 {
            return Err(Error::InvalidArgument(format!("radius must be >= 0, got {r}")));
        }
        match self.family {
            WarpFamily::TheoremA => self
                .table
                .as_ref()
                .expect("constructor guarantees a table for Theorem A")
                .sample(r),
            WarpFamily::TheoremB => eval_theorem_b(r),
            WarpFamily::Flat { fiber } => Ok(flat_sample(r, fiber)),
        }
    }

    /// `h(r)` for `r >= 0`.
    pub fn h(&self, r: f64) -> Result<f64> {
        match self.family {
            WarpFamily::TheoremB => {
                finite(r, "radius")?;
                Ok(1.0 / (2.0 + r * r).ln())
            }
            WarpFamily::Flat { fiber } => Ok(fiber),
            WarpFamily::TheoremA => self.sample(r).map(|s| s.h),
        }
    }

    /// `h(0)`, the length scale of the axis circle.
    pub fn h0(&self) -> f64 {
        match self.family {
            WarpFamily::TheoremA => 1.0,
            WarpFamily::TheoremB => 1.0 / std::f64::consts::LN_2,
            WarpFamily::Flat { fiber } => fiber,
        }
    }

    /// Even extension `h̄` of the fiber size to the signed strip coordinate.
    pub fn fiber(&self, r: f64) -> Result<Fiber> {
        let s = self.sample(r.abs())?;
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        Ok(Fiber {
            h: s.h,
            dh: sign * s.dh,
            d2h: s.d2h,
        })
    }

    /// Radius `r* > 0` where `h(r*) = j` for a decaying family with
    /// `0 < j < h(0)`.
    pub fn turning_radius(&self, j: f64) -> Result<f64> {
        finite(j, "Clairaut constant")?;
        let j = j.abs();
        if !self.decays() {
            return Err(Error::Bracket(format!(
                "{} has constant fiber size; geodesics never turn",
                self.family
            )));
        }
        if !(j > 0.0 && j < self.h0()) {
            return Err(Error::Bracket(format!("|J| = {j} outside (0, h(0) = {})", self.h0())));
        }
        let limit = self.r_limit();
        invert_decreasing(|r| self.h(r), j, 0.0, 1.0_f64.min(limit), limit, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_round_trips_through_text() {
        for fam in [
            WarpFamily::TheoremA,
            WarpFamily::TheoremB,
            WarpFamily::Flat { fiber: 0.75 },
        ] {
            assert_eq!(fam.to_string().parse::<WarpFamily>().unwrap(), fam);
        }
        assert!("flat:-1".parse::<WarpFamily>().is_err());
        assert!("sphere".parse::<WarpFamily>().is_err());
    }

    #[test]
    fn phi_rejects_bad_input() {
        assert!(phi(-1.0, 1e-10).is_err());
        assert!(phi(f64::NAN, 1e-10).is_err());
        assert!(phi(1.0, 0.0).is_err());
        assert_eq!(phi(0.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn theorem_b_boundary_values_are_exact() {
        let s = eval_theorem_b(0.0).unwrap();
        assert_eq!(s.f, 0.0);
        assert_eq!(s.df, 1.0);
        assert_eq!(s.d2f, 0.0);
        assert_eq!(s.dh, 0.0);
        assert!((s.h - std::f64::consts::LOG2_E).abs() < 1e-15);
    }

    #[test]
    fn origin_series_meets_direct_quotients() {
        // just above the crossover the direct formulas are still accurate
        let below = eval_theorem_b(SERIES_CROSSOVER * 0.999).unwrap().quotients;
        let above = eval_theorem_b(SERIES_CROSSOVER * 1.001).unwrap().quotients;
        assert!((below.d2f_over_f - above.d2f_over_f).abs() < 1e-6);
        assert!((below.defect_over_f2 - above.defect_over_f2).abs() < 1e-6);
        assert!((below.dfdh_over_fh - above.dfdh_over_fh).abs() < 1e-6);
    }

    #[test]
    fn theorem_a_needs_table_and_rejects_out_of_range() {
        assert!(Warp::new(WarpFamily::TheoremA, None).is_err());
        let w = Warp::theorem_a(5.0, 1e-10).unwrap();
        assert!(matches!(w.sample(6.0), Err(Error::OutOfRange { .. })));
        assert!(w.sample(5.0).is_ok());
    }

    #[test]
    fn turning_radius_of_theorem_b_inverts_closed_form() {
        let w = Warp::theorem_b();
        let j = 0.5 * w.h0();
        assert!((w.turning_radius(j).unwrap() - 2f64.sqrt()).abs() < 1e-13);
        assert!(Warp::flat(1.0).unwrap().turning_radius(0.5).is_err());
        assert!(w.turning_radius(2.0).is_err());
    }
}
