//! Distances in the universal cover from the fiber over the base point.
//!
//! The cover of a slice through the axis is the strip `ℝ ×_h̄ ℝ`, with deck
//! generator `y ↦ y + 2π`. Every translation in `y` is an isometry of the
//! strip, so a distance from a point on the axis reduces to
//! `d((0, 0), (t, Y))` with `t, Y >= 0`.
//!
//! Geodesics from the axis with Clairaut constant `J = h(ρ)` oscillate
//! between `±ρ`. Writing `Δy, ΔS` for the fiber advance and arclength of a
//! half-oscillation and `y_A, s_A` for those of the first leg from the axis
//! to radius `t`, the arrivals at radius `t` sit at
//!
//! * `y = y_A`, `s = s_A` (direct branch, `n = 0`),
//! * `y = nΔy + y_A`, `s = nΔS + s_A` (sign `+1`, `n >= 1`),
//! * `y = nΔy - y_A`, `s = nΔS - s_A` (sign `-1`, `n >= 1`),
//!
//! and the returns to the axis at `y = nΔy`, `s = nΔS`. Distances are the
//! shortest arrival over all branches, found by scanning and bracketing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::geodesic::{flow, locate, open_integrals, ClairautQuad, TRACE_TOL_FACTOR};
use crate::numeric::ode::{StepControl, Stepper};
use crate::numeric::quad::{integrate_scalar, QuadTol};
use crate::numeric::root::brent;
use crate::warp::Warp;

/// Point of the strip; `r >= 0` is the canonical representative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripPoint {
    pub r: f64,
    pub y: f64,
}

impl StripPoint {
    /// The lifted base point `p̃ = (0, 0)`.
    pub const BASE: StripPoint = StripPoint { r: 0.0, y: 0.0 };

    pub fn new(r: f64, y: f64) -> Result<StripPoint> {
        finite(r, "r")?;
        finite(y, "y")?;
        if r < 0.0 {
            return Err(Error::InvalidArgument(format!("strip points need r >= 0, got {r}")));
        }
        Ok(StripPoint { r, y })
    }

    /// The orbit point `γˡ p̃ = (0, 2πl)`.
    pub fn orbit(l: i64) -> StripPoint {
        StripPoint {
            r: 0.0,
            y: 2.0 * PI * l as f64,
        }
    }
}

/// Deck transformation `γˡ`.
pub fn deck(pt: StripPoint, l: i64) -> StripPoint {
    StripPoint {
        r: pt.r,
        y: pt.y + 2.0 * PI * l as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    QuadratureBvp,
    ShootingBvp,
    AxisPath,
    GridOracle,
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMethod::QuadratureBvp => "quadrature-bvp",
            DistanceMethod::ShootingBvp => "shooting-bvp",
            DistanceMethod::AxisPath => "axis-path",
            DistanceMethod::GridOracle => "grid-oracle",
        })
    }
}

/// The geodesic realising a distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicSummary {
    /// Clairaut constant.
    pub j: f64,
    /// Completed half-oscillations before the arrival.
    pub n: usize,
    /// Branch sign (see the module documentation).
    pub sign: i8,
    /// Turning radius, when it was resolved (`0` for the axis circle).
    pub r_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub method: DistanceMethod,
    pub geodesic: Option<GeodesicSummary>,
    /// No geodesic branch converged; the value is the explicit upper bound.
    pub degraded: bool,
    pub failed_branches: Vec<String>,
}

/// `L(l) = d(p̃, γˡ p̃)`.
pub fn distance_axis(warp: &Warp, l: i64, tol: f64) -> Result<DistanceResult> {
    fiber_distance(warp, 0.0, 2.0 * PI * l.unsigned_abs() as f64, tol)
}

/// `d(γˡ p̃, (t, 0))`, equal to `d(p̃, (t, 2πl))` by deck invariance.
pub fn distance_axis_to_point(warp: &Warp, l: i64, t: f64, tol: f64) -> Result<DistanceResult> {
    finite(t, "target radius")?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("target radius must be >= 0, got {t}")));
    }
    fiber_distance(warp, t, 2.0 * PI * l.unsigned_abs() as f64, tol)
}

/// Distance between two strip points, one of which must lie on the axis.
pub fn distance(warp: &Warp, a: StripPoint, b: StripPoint, tol: f64) -> Result<DistanceResult> {
    let a = StripPoint::new(a.r, a.y)?;
    let b = StripPoint::new(b.r, b.y)?;
    if a.r == 0.0 {
        fiber_distance(warp, b.r, (b.y - a.y).abs(), tol)
    } else if b.r == 0.0 {
        fiber_distance(warp, a.r, (b.y - a.y).abs(), tol)
    } else {
        Err(Error::Unsupported(
            "distances are only available when one endpoint lies on the axis r = 0".into(),
        ))
    }
}

/// Points per scan: logarithmic in the offset from the left end, then uniform.
const SCAN_LOG: usize = 40;
const SCAN_UNIFORM: usize = 60;
/// Samples of the launch angle in the open-branch scan.
const SCAN_ANGLE: usize = 48;

fn scan_grid(lo: f64, hi: f64) -> Vec<f64> {
    let width = hi - lo;
    let mut pts: Vec<f64> = (0..SCAN_LOG)
        .map(|k| lo + width * 10f64.powf(-6.0 * (1.0 - k as f64 / (SCAN_LOG - 1) as f64)))
        .chain((1..=SCAN_UNIFORM).map(|k| lo + width * k as f64 / SCAN_UNIFORM as f64))
        .filter(|&p| p > lo && p <= hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// [`scan_grid`] plus the left end `t`, where the direct branch and the
/// `n = 1`, sign `-1` branch meet at `y = Δy(t)/2` with a square-root
/// profile.
fn junction_grid(t: f64, hi: f64) -> Vec<f64> {
    std::iter::once(t).chain(scan_grid(t, hi)).collect()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    length: f64,
    summary: Option<GeodesicSummary>,
    method: DistanceMethod,
}

fn better(a: &Candidate, b: &Candidate) -> Ordering {
    let key = |c: &Candidate| c.summary.map_or((usize::MAX, f64::INFINITY), |s| (s.n, s.j));
    a.length
        .total_cmp(&b.length)
        .then_with(|| key(a).0.cmp(&key(b).0))
        .then_with(|| key(a).1.total_cmp(&key(b).1))
}

/// Quadrature data of one turning radius.
#[derive(Debug, Clone, Copy)]
struct Sample {
    rho: f64,
    j: f64,
    /// Full half-oscillation advance and arclength (absent when not needed).
    dy: f64,
    ds: f64,
    /// First leg to radius `t`.
    ya: f64,
    sa: f64,
}

struct Solver<'a> {
    warp: &'a Warp,
    t: f64,
    y: f64,
    tol: f64,
    qtol: f64,
}

type Bracket = (usize, i8, f64, f64);

impl Solver<'_> {
    fn sample(&self, rho: f64, full: bool) -> Result<Sample> {
        let q = ClairautQuad::new(self.warp, rho)?;
        // the half-oscillation is needed for arrivals that turn inside t
        let (dy, ds) = if full || self.t >= rho {
            let [a, e] = q.integrals(rho, self.qtol)?;
            (2.0 * a, 2.0 * (rho + e))
        } else {
            (f64::NAN, f64::NAN)
        };
        let (ya, sa) = if self.t == 0.0 {
            (0.0, 0.0)
        } else if self.t >= rho {
            (dy / 2.0, ds / 2.0)
        } else {
            let [a, e] = q.integrals(self.t, self.qtol)?;
            (a, self.t + e)
        };
        Ok(Sample {
            rho,
            j: q.j(),
            dy,
            ds,
            ya,
            sa,
        })
    }

    fn arrival(s: &Sample, n: usize, sign: i8) -> (f64, f64) {
        if n == 0 {
            return (s.ya, s.sa);
        }
        let nf = n as f64;
        let sg = f64::from(sign);
        (nf * s.dy + sg * s.ya, nf * s.ds + sg * s.sa)
    }

    fn candidate(s: &Sample, n: usize, sign: i8) -> Candidate {
        Candidate {
            length: Self::arrival(s, n, sign).1,
            summary: Some(GeodesicSummary {
                j: s.j,
                n,
                sign,
                r_star: Some(s.rho),
            }),
            method: DistanceMethod::QuadratureBvp,
        }
    }

    /// Evaluate the scan in parallel, returning the good samples in order and
    /// the failure messages.
    fn scan(&self, grid: &[f64], full: bool) -> (Vec<Sample>, Vec<String>) {
        let res: Vec<Result<Sample>> = grid.par_iter().map(|&rho| self.sample(rho, full)).collect();
        let mut ok = Vec::with_capacity(res.len());
        let mut failed = Vec::new();
        for (rho, r) in grid.iter().zip(res) {
            match r {
                Ok(s) => ok.push(s),
                Err(e) => failed.push(format!("scan at r* = {rho}: {e}")),
            }
        }
        (ok, failed)
    }

    fn brackets(&self, samples: &[Sample], branches: &[(usize, i8)]) -> Vec<Bracket> {
        let mut out = Vec::new();
        for &(n, sign) in branches {
            let g = |s: &Sample| Self::arrival(s, n, sign).0 - self.y;
            for w in samples.windows(2) {
                let (a, b) = (g(&w[0]), g(&w[1]));
                if a == 0.0 {
                    out.push((n, sign, w[0].rho, w[0].rho));
                } else if a * b < 0.0 {
                    out.push((n, sign, w[0].rho, w[1].rho));
                }
            }
            if let Some(last) = samples.last() {
                if g(last) == 0.0 {
                    out.push((n, sign, last.rho, last.rho));
                }
            }
        }
        out
    }

    fn solve_brackets(&self, brackets: &[Bracket], full: bool) -> (Vec<Candidate>, Vec<String>) {
        let res: Vec<Result<Candidate>> = brackets
            .par_iter()
            .map(|&(n, sign, lo, hi)| {
                let rho = if lo == hi {
                    lo
                } else {
                    let xtol = 1e-13 * hi.max(1.0);
                    brent(
                        |rho| Ok(Self::arrival(&self.sample(rho, full)?, n, sign).0 - self.y),
                        lo,
                        hi,
                        xtol,
                        200,
                    )?
                };
                Ok(Self::candidate(&self.sample(rho, full)?, n, sign))
            })
            .collect();
        let mut cands = Vec::new();
        let mut failed = Vec::new();
        for (b, r) in brackets.iter().zip(res) {
            match r {
                Ok(c) => cands.push(c),
                Err(e) => failed.push(format!("branch n = {}, sign = {}: {e}", b.0, b.1)),
            }
        }
        (cands, failed)
    }

    fn orbit(&self) -> Result<DistanceResult> {
        let h0 = self.warp.h0();
        let axis = self.y * h0;
        let mut cands = vec![Candidate {
            length: axis,
            summary: Some(GeodesicSummary {
                j: h0,
                n: 0,
                sign: 1,
                r_star: Some(0.0),
            }),
            method: DistanceMethod::AxisPath,
        }];
        let mut failed = Vec::new();
        if self.warp.decays() {
            // a branch reaching r* has length >= 2r*
            let rb = (0.5 * axis).min(self.warp.r_limit());
            let (samples, f) = self.scan(&scan_grid(0.0, rb), true);
            failed.extend(f);
            let dy_min = samples.iter().map(|s| s.dy).fold(f64::INFINITY, f64::min);
            if dy_min.is_finite() && dy_min > 0.0 {
                let n_max = (self.y / dy_min).ceil() as usize + 4;
                let branches: Vec<(usize, i8)> = (1..=n_max).map(|n| (n, 0)).collect();
                let brackets = self.brackets(&samples, &branches);
                let (c, f) = self.solve_brackets(&brackets, true);
                cands.extend(c);
                failed.extend(f);
            }
        }
        let best = *cands.iter().min_by(|a, b| better(a, b)).expect("axis candidate");
        let r_star = best.summary.and_then(|s| s.r_star).unwrap_or(0.0);
        Ok(DistanceResult {
            value: best.length,
            lower_bound: (best.length - self.tol).max(2.0 * r_star).max(0.0),
            upper_bound: (best.length + self.tol).min(axis),
            method: best.method,
            geodesic: best.summary,
            degraded: false,
            failed_branches: failed,
        })
    }

    fn point(&self) -> Result<DistanceResult> {
        let (t, y) = (self.t, self.y);
        let ht = self.warp.h(t)?;
        let ub = t + y * ht;
        let mut cands = Vec::new();
        let mut failed = Vec::new();

        // Turning radii beyond rho_hi are handled through J directly.
        let (rho_hi, j_cap) = if self.warp.decays() {
            match self.warp.turning_radius(0.5 * ht) {
                Ok(r) => (r, 0.5 * ht),
                Err(_) => {
                    let lim = self.warp.r_limit();
                    (lim, self.warp.h(lim)?)
                }
            }
        } else {
            (t, ht * (1.0 - 1e-12))
        };

        if rho_hi > t {
            let (samples, f) = self.scan(&junction_grid(t, rho_hi), false);
            failed.extend(f);
            let brackets = self.brackets(&samples, &[(0, 1)]);
            let (c, f) = self.solve_brackets(&brackets, false);
            cands.extend(c);
            failed.extend(f);
        }

        match self.open_branch(ht, j_cap) {
            Ok((c, f)) => {
                cands.extend(c);
                failed.extend(f);
            }
            Err(e) => failed.push(format!("open branch: {e}")),
        }

        if self.warp.decays() {
            let rb = (0.5 * (ub + t)).min(self.warp.r_limit());
            if rb > t {
                let (samples, f) = self.scan(&junction_grid(t, rb), true);
                failed.extend(f);
                let dy_min = samples.iter().map(|s| s.dy).fold(f64::INFINITY, f64::min);
                if dy_min.is_finite() && dy_min > 0.0 {
                    let n_max = (y / dy_min).ceil() as usize + 4;
                    let branches: Vec<(usize, i8)> = (1..=n_max).flat_map(|n| [(n, 1), (n, -1)]).collect();
                    let brackets = self.brackets(&samples, &branches);
                    let (c, f) = self.solve_brackets(&brackets, true);
                    cands.extend(c);
                    failed.extend(f);
                }
            }
        }

        let best = cands
            .iter()
            .filter(|c| c.length <= ub)
            .min_by(|a, b| better(a, b))
            .copied();
        Ok(match best {
            Some(best) => DistanceResult {
                value: best.length,
                lower_bound: (best.length - self.tol).max(t),
                upper_bound: (best.length + self.tol).min(ub),
                method: best.method,
                geodesic: best.summary,
                degraded: false,
                failed_branches: failed,
            },
            None => DistanceResult {
                value: ub,
                lower_bound: t,
                upper_bound: ub,
                method: DistanceMethod::AxisPath,
                geodesic: None,
                degraded: true,
                failed_branches: failed,
            },
        })
    }

    /// Direct branch for `J < j_cap`, parametrised by `J = h(t) sin w`.
    ///
    /// On `[0, t]` we have `J/h <= j_cap/h(t) = κ`, so
    /// `J·I2 <= y_A(J) <= J·I2/√(1-κ²)` with `I2 = ∫₀ᵗ h⁻²`; any root lies in
    /// `[Y√(1-κ²)/I2, Y/I2]`.
    fn open_branch(&self, ht: f64, j_cap: f64) -> Result<(Vec<Candidate>, Vec<String>)> {
        let (i2, _) = integrate_scalar(
            |r| Ok(self.warp.h(r)?.powi(-2)),
            0.0,
            self.t,
            QuadTol::new(self.qtol, 0.0),
        )?;
        let kappa = j_cap / ht;
        let j_lo = self.y * (1.0 - kappa * kappa).sqrt() / i2;
        let j_hi = (self.y / i2).min(j_cap);
        if !(j_lo < j_hi) {
            return Ok((Vec::new(), Vec::new()));
        }
        let (w_lo, w_hi) = ((j_lo / ht).asin(), (j_hi / ht).asin());
        let eval = |w: f64| -> Result<(f64, [f64; 2])> {
            let j = ht * w.sin();
            Ok((j, open_integrals(self.warp, j, self.t, self.qtol)?))
        };
        let ws: Vec<f64> = (0..=SCAN_ANGLE)
            .map(|k| w_lo + (w_hi - w_lo) * k as f64 / SCAN_ANGLE as f64)
            .collect();
        let vals: Vec<Result<(f64, [f64; 2])>> = ws.par_iter().map(|&w| eval(w)).collect();
        let mut pts = Vec::new();
        let mut failed = Vec::new();
        for (w, v) in ws.iter().zip(vals) {
            match v {
                Ok((_, [ya, _])) => pts.push((*w, ya - self.y)),
                Err(e) => failed.push(format!("open scan at w = {w}: {e}")),
            }
        }
        let mut brackets = Vec::new();
        for p in pts.windows(2) {
            if p[0].1 == 0.0 {
                brackets.push((p[0].0, p[0].0));
            } else if p[0].1 * p[1].1 < 0.0 {
                brackets.push((p[0].0, p[1].0));
            }
        }
        let mut cands = Vec::new();
        for (lo, hi) in brackets {
            let w = if lo == hi {
                Ok(lo)
            } else {
                brent(|w| Ok(eval(w)?.1[0] - self.y), lo, hi, 1e-15, 200)
            };
            match w.and_then(eval) {
                Ok((j, [_, e])) => cands.push(Candidate {
                    length: self.t + e,
                    summary: Some(GeodesicSummary {
                        j,
                        n: 0,
                        sign: 1,
                        r_star: None,
                    }),
                    method: DistanceMethod::QuadratureBvp,
                }),
                Err(e) => failed.push(format!("open branch: {e}")),
            }
        }
        Ok((cands, failed))
    }
}

/// `d((0, 0), (t, y))` for `t, y >= 0`.
fn fiber_distance(warp: &Warp, t: f64, y: f64, tol: f64) -> Result<DistanceResult> {
    finite(t, "target radius")?;
    finite(y, "fiber offset")?;
    finite(tol, "tolerance")?;
    if !(tol > 0.0) || t < 0.0 || y < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need tol > 0, t >= 0, y >= 0 (tol = {tol}, t = {t}, y = {y})"
        )));
    }
    if t > warp.r_limit() {
        return Err(Error::OutOfRange {
            r: t,
            r_max: warp.r_limit(),
        });
    }
    if y == 0.0 {
        return Ok(DistanceResult {
            value: t,
            lower_bound: t,
            upper_bound: t,
            method: DistanceMethod::QuadratureBvp,
            geodesic: Some(GeodesicSummary {
                j: 0.0,
                n: 0,
                sign: 1,
                r_star: None,
            }),
            degraded: false,
            failed_branches: Vec::new(),
        });
    }
    let scale = (t + y * warp.h(t)?).max(1.0);
    let solver = Solver {
        warp,
        t,
        y,
        tol,
        qtol: (1e-2 * tol / scale).clamp(1e-13, 1e-9),
    };
    if t == 0.0 {
        solver.orbit()
    } else {
        solver.point()
    }
}

// ---------------------------------------------------------------------------
// Shooting

/// Integrate from the axis with Clairaut constant `j` and launch sign
/// `launch`, returning `(y, s)` at the `index`-th (0-based) arrival at
/// radius `t` (axis crossings after the start when `t = 0`).
fn shoot(warp: &Warp, j: f64, launch: f64, t: f64, index: usize, max_len: f64, tol: f64) -> Result<(f64, f64)> {
    let h0 = warp.h0();
    let ratio = j / h0;
    let mut u = [0.0, 0.0, launch * (1.0 - ratio * ratio).max(0.0).sqrt(), j / (h0 * h0)];
    let f = flow(warp);
    let inner = tol * TRACE_TOL_FACTOR;
    let stepper = Stepper::new(StepControl::new(inner, inner).with_h_max(crate::geodesic::MAX_TRACE_STEP));
    let (mut s, mut h) = (0.0, 0.01);
    let mut seen = 0;
    while s < max_len {
        let acc = stepper.step(&f, s, &u, h, None)?;
        // split at a turning point so a near-tangent pass shows both crossings
        let mut legs = vec![(0.0, u, acc.h, acc.y)];
        if t > 0.0 && u[2] * acc.y[2] < 0.0 {
            let (tau, ut) = locate(&f, s, &u, acc.h, 2, 0.0)?;
            legs = vec![(0.0, u, tau, ut), (tau, ut, acc.h - tau, acc.y)];
        }
        for (off, us, len, ue) in legs {
            if (us[0] - t) * (ue[0] - t) < 0.0 {
                if seen == index {
                    let (tau, ev) = locate(&f, s + off, &us, len, 0, t)?;
                    return Ok((ev[1], s + off + tau));
                }
                seen += 1;
            }
        }
        let mut next = acc.y;
        let hb = warp.fiber(next[0])?.h;
        let scale = (next[2] * next[2] + hb * hb * next[3] * next[3]).sqrt().recip();
        next[2] *= scale;
        next[3] *= scale;
        u = next;
        s += acc.h;
        h = acc.h_next;
    }
    Err(Error::Bracket(format!("no arrival {index} within arclength {max_len}")))
}

/// Re-solve the boundary-value problem behind `seed` by shooting traced
/// geodesics, using the seed's branch and Clairaut constant as the start.
pub fn shooting_refine(warp: &Warp, t: f64, y: f64, seed: &DistanceResult, tol: f64) -> Result<DistanceResult> {
    let g = match (seed.method, seed.geodesic) {
        (DistanceMethod::QuadratureBvp, Some(g)) if g.j > 0.0 => g,
        _ => {
            return Err(Error::NotApplicable(format!(
                "shooting needs an oscillating or direct quadrature branch, got {}",
                seed.method
            )))
        }
    };
    let (launch, index) = if t == 0.0 {
        (1.0, g.n - 1)
    } else if (g.n % 2 == 0) == (g.sign > 0) {
        (1.0, g.n)
    } else {
        (-1.0, g.n - 1)
    };
    let max_len = 2.0 * seed.value + 10.0;
    let miss = |j: f64| -> Result<f64> { Ok(shoot(warp, j, launch, t, index, max_len, tol)?.0 - y) };
    let h0 = warp.h0();
    let f0 = miss(g.j)?;
    let mut bracket = None;
    let mut rel = 1e-9;
    while f0 != 0.0 && bracket.is_none() {
        for cand in [g.j * (1.0 - rel), (g.j * (1.0 + rel)).min(h0 * (1.0 - 1e-15))] {
            // a trial that never reaches the target radius brackets nothing
            let fc = match miss(cand) {
                Ok(v) => v,
                Err(Error::Bracket(_)) => continue,
                Err(e) => return Err(e),
            };
            if fc * f0 <= 0.0 {
                bracket = Some(if cand < g.j { (cand, g.j) } else { (g.j, cand) });
                break;
            }
        }
        rel *= 10.0;
        if rel > 0.5 {
            return Err(Error::Bracket("shooting bracket not found around the seed".into()));
        }
    }
    let j = match bracket {
        Some((a, b)) => brent(miss, a, b, 1e-15 * g.j, 200)?,
        None => g.j,
    };
    let (_, s) = shoot(warp, j, launch, t, index, max_len, tol)?;
    Ok(DistanceResult {
        value: s,
        lower_bound: seed.lower_bound.min(s),
        upper_bound: seed.upper_bound.max(s),
        method: DistanceMethod::ShootingBvp,
        geodesic: Some(GeodesicSummary { j, ..g }),
        degraded: false,
        failed_branches: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Grid oracle

/// Largest stencil offset; offsets `(a, b)` with `gcd(|a|, |b|) = 1` and
/// `max(|a|, |b|) <= STENCIL_REACH`.
pub const STENCIL_REACH: i64 = 3;
/// Fraction of the radial window at which grid cells are metrically square.
pub const SQUARE_CELL_FRACTION: f64 = 0.2;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn stencil() -> Vec<(i64, i64)> {
    let mut s = Vec::new();
    for a in -STENCIL_REACH..=STENCIL_REACH {
        for b in -STENCIL_REACH..=STENCIL_REACH {
            if (a, b) != (0, 0) && gcd(a, b) == 1 {
                s.push((a, b));
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    dist: f64,
    idx: usize,
}

impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Shortest path between `a` and `b` over a uniform `(r, y)` grid of spacing
/// about `resolution`, with edges weighted by the metric length of the
/// straight coordinate segment (midpoint rule).
///
/// The radial window `|r| <= (U + r_a + r_b)/2`, with `U` the length of an
/// explicit radial-plus-parallel path, contains every shorter path. The
/// fiber window is padded and grown until the grid path avoids its edge.
pub fn grid_distance_oracle(warp: &Warp, a: StripPoint, b: StripPoint, resolution: f64) -> Result<f64> {
    let a = StripPoint::new(a.r, a.y)?;
    let b = StripPoint::new(b.r, b.y)?;
    finite(resolution, "resolution")?;
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let dy_span = (b.y - a.y).abs();
    let (ha, hb) = (warp.h(a.r)?, warp.h(b.r)?);
    let ub = (a.r - b.r).abs() + dy_span * ha.min(hb);
    let r_win = (0.5 * (ub + a.r + b.r)).min(warp.r_limit());
    for pad in [0.25, 0.5, 1.0, 2.0] {
        match grid_once(warp, a, b, resolution, r_win, pad * dy_span.max(1.0)) {
            Err(Error::WindowTooSmall) => continue,
            other => return other,
        }
    }
    Err(Error::WindowTooSmall)
}

fn grid_once(warp: &Warp, a: StripPoint, b: StripPoint, res: f64, r_win: f64, y_pad: f64) -> Result<f64> {
    // r nodes: a.r + i·dr, with b.r on the grid
    let span_r = (b.r - a.r).abs();
    let dr = if span_r > 0.0 {
        span_r / (span_r / res).ceil()
    } else {
        res
    };
    let i_lo = -(((r_win + a.r) / dr).ceil() as i64) - 1;
    let i_hi = ((r_win - a.r) / dr).ceil() as i64 + 1;
    let nr = (i_hi - i_lo + 1) as usize;
    // y nodes: a.y + j·dy; cells are metrically square at the radius
    // SQUARE_CELL_FRACTION·r_win, where minimisers spend most of their length
    let h_ref = warp.h(SQUARE_CELL_FRACTION * r_win)?;
    let res_y = res / h_ref;
    let span_y = b.y - a.y;
    let dy = if span_y != 0.0 {
        span_y.abs() / (span_y.abs() / res_y).ceil()
    } else {
        res_y
    };
    let (y_min, y_max) = (a.y.min(b.y) - y_pad, a.y.max(b.y) + y_pad);
    let j_lo = ((y_min - a.y) / dy).floor() as i64;
    let j_hi = ((y_max - a.y) / dy).ceil() as i64;
    let ny = (j_hi - j_lo + 1) as usize;
    let nodes = nr.checked_mul(ny).filter(|&n| n <= 50_000_000).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "grid of {nr} x {ny} nodes is too large; coarsen the resolution"
        ))
    })?;

    let r_of = |i: i64| a.r + i as f64 * dr;
    let st = stencil();
    // weights[row][k] for stencil offset k from row
    let mut weights = vec![0.0; nr * st.len()];
    for row in 0..nr {
        let i = i_lo + row as i64;
        for (k, &(da, db)) in st.iter().enumerate() {
            let mid = r_of(i) + 0.5 * da as f64 * dr;
            let h = if mid.abs() <= warp.r_limit() {
                warp.fiber(mid)?.h
            } else {
                f64::NAN
            };
            let (x, z) = (da as f64 * dr, h * db as f64 * dy);
            weights[row * st.len() + k] = (x * x + z * z).sqrt();
        }
    }
    let start_row = (-i_lo) as usize;
    let start_col = (-j_lo) as usize;
    let target_row = (((b.r - a.r) / dr).round() as i64 - i_lo) as usize;
    let target_col = ((span_y / dy).round() as i64 - j_lo) as usize;
    let idx = |row: usize, col: usize| row * ny + col;
    let (src, dst) = (idx(start_row, start_col), idx(target_row, target_col));

    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Node { dist: 0.0, idx: src });
    while let Some(Node { dist: d, idx: u }) = heap.pop() {
        if u == dst {
            break;
        }
        if d > dist[u] {
            continue;
        }
        let (row, col) = ((u / ny) as i64, (u % ny) as i64);
        for (k, &(da, db)) in st.iter().enumerate() {
            let (nrow, ncol) = (row + da, col + db);
            if nrow < 0 || ncol < 0 || nrow >= nr as i64 || ncol >= ny as i64 {
                continue;
            }
            let w = weights[row as usize * st.len() + k];
            if !w.is_finite() {
                continue;
            }
            let v = idx(nrow as usize, ncol as usize);
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Node { dist: nd, idx: v });
            }
        }
    }
    if !dist[dst].is_finite() {
        return Err(Error::InvariantViolation("grid target unreachable".into()));
    }
    let mut v = dst;
    while v != usize::MAX {
        let (row, col) = (v / ny, v % ny);
        if row == 0 || col == 0 || row == nr - 1 || col == ny - 1 {
            return Err(Error::WindowTooSmall);
        }
        v = prev[v];
    }
    Ok(dist[dst])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_has_thirty_two_directions() {
        let s = stencil();
        assert_eq!(s.len(), 32);
        assert!(s.contains(&(3, 2)) && !s.contains(&(2, 2)));
    }

    #[test]
    fn scan_grid_is_sorted_and_inside() {
        let g = scan_grid(2.0, 5.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] > 2.0 && *g.last().unwrap() == 5.0);
    }

    #[test]
    fn deck_action_composes() {
        let p = StripPoint::new(1.5, 0.25).unwrap();
        assert_eq!(deck(p, 0), p);
        let q = deck(deck(p, 3), -5);
        assert!((q.y - deck(p, -2).y).abs() < 1e-12);
    }

    #[test]
    fn off_axis_pairs_are_unsupported() {
        let w = Warp::theorem_b();
        let a = StripPoint::new(1.0, 0.0).unwrap();
        let b = StripPoint::new(2.0, 1.0).unwrap();
        assert!(matches!(distance(&w, a, b, 1e-8), Err(Error::Unsupported(_))));
    }
}
