//! Geodesics of the strip `ℝ ×_h̄ ℝ` with metric `dr² + h̄(r)² dy²`.
//!
//! `h̄` is the even extension of the fiber size, so a signed `r` describes
//! both halves of a slice through the axis. The Clairaut constant
//! `J = h̄(r)² y'` is conserved along every geodesic.

use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::numeric::ode::{dopri_step, StepControl, Stepper};
use crate::numeric::quad::{gauss_legendre_10, integrate, QuadTol};
use crate::numeric::root::brent;
use crate::warp::Warp;

/// Largest arclength step taken by [`trace`], so that no step hides both a
/// turning point and an axis crossing.
pub const MAX_TRACE_STEP: f64 = 0.5;
/// The stepper runs at this fraction of the requested tolerance so the
/// Clairaut drift over long traces stays near the tolerance itself.
pub(crate) const TRACE_TOL_FACTOR: f64 = 0.01;
/// Arclength accuracy of located events.
pub const EVENT_TOL: f64 = 1e-10;
/// Allowed mismatch `|h̄(r) - |J||` at a located turning point.
pub const TURNING_TOL: f64 = 1e-6;
/// Unit-speed tolerance for user-supplied states.
pub const SPEED_TOL: f64 = 1e-9;

/// Position and velocity on the strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripState {
    pub r: f64,
    pub y: f64,
    pub dr: f64,
    pub dy: f64,
}

impl StripState {
    /// Unit-speed state at `(r, y)` making angle `angle` with the parallel
    /// `r = const` (positive angles point towards increasing `r`).
    pub fn launch(warp: &Warp, r: f64, y: f64, angle: f64) -> Result<StripState> {
        finite(angle, "launch angle")?;
        finite(y, "fiber coordinate")?;
        let h = warp.fiber(r)?.h;
        Ok(StripState {
            r,
            y,
            dr: angle.sin(),
            dy: angle.cos() / h,
        })
    }

    /// `dr² + h̄(r)² dy² - 1`.
    pub fn speed_defect(&self, warp: &Warp) -> Result<f64> {
        let h = warp.fiber(self.r)?.h;
        Ok(self.dr * self.dr + h * h * self.dy * self.dy - 1.0)
    }

    fn to_array(self) -> [f64; 4] {
        [self.r, self.y, self.dr, self.dy]
    }

    fn from_array(a: [f64; 4]) -> StripState {
        StripState {
            r: a[0],
            y: a[1],
            dr: a[2],
            dy: a[3],
        }
    }

    fn check(&self, warp: &Warp) -> Result<()> {
        for (v, what) in [(self.r, "r"), (self.y, "y"), (self.dr, "dr"), (self.dy, "dy")] {
            finite(v, what)?;
        }
        let defect = self.speed_defect(warp)?;
        if defect.abs() > SPEED_TOL {
            return Err(Error::InvalidArgument(format!(
                "start state is not unit speed (|v|² - 1 = {defect:e})"
            )));
        }
        Ok(())
    }
}

/// Clairaut constant `J = h̄(r)² dy`.
pub fn clairaut(warp: &Warp, state: &StripState) -> Result<f64> {
    finite(state.dy, "dy")?;
    let h = warp.fiber(state.r)?.h;
    Ok(h * h * state.dy)
}

/// One recorded point of a traced geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSample {
    pub s: f64,
    pub state: StripState,
    /// `J(s) - J(0)`.
    pub j_drift: f64,
}

/// A located event (turning point or axis crossing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEvent {
    pub s: f64,
    pub state: StripState,
}

/// Half-oscillation measurements: turning radius, fiber advance and
/// arclength between consecutive axis crossings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationData {
    pub j: f64,
    pub r_star: f64,
    pub delta_y: f64,
    pub delta_s: f64,
}

/// Lemma-level classification of a geodesic leaving the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Classification {
    RadialRay,
    AxisClosed,
    Oscillating(OscillationData),
}

/// Output of [`trace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicPath {
    pub start: StripState,
    pub j: f64,
    pub samples: Vec<PathSample>,
    pub turning_points: Vec<PathEvent>,
    pub axis_crossings: Vec<PathEvent>,
    /// Present when the start lies on the axis.
    pub class: Option<Classification>,
    pub max_j_drift: f64,
    /// Largest `|speed² - 1|` corrected by renormalisation.
    pub max_speed_defect: f64,
}

pub(crate) fn flow(warp: &Warp) -> impl Fn(f64, &[f64; 4]) -> Result<[f64; 4]> + '_ {
    move |_s, u| {
        let fb = warp.fiber(u[0])?;
        Ok([
            u[2],
            u[3],
            fb.h * fb.dh * u[3] * u[3],
            -2.0 * (fb.dh / fb.h) * u[2] * u[3],
        ])
    }
}

/// Arclength offset in `(0, h)` at which component `c` of the flow from
/// `u0` crosses `level`, given a crossing over the full step.
pub(crate) fn locate<F>(f: &F, s0: f64, u0: &[f64; 4], h: f64, c: usize, level: f64) -> Result<(f64, [f64; 4])>
where
    F: Fn(f64, &[f64; 4]) -> Result<[f64; 4]>,
{
    let at = |tau: f64| -> Result<[f64; 4]> {
        if tau == 0.0 {
            return Ok(*u0);
        }
        Ok(dopri_step(f, s0, u0, tau)?.0)
    };
    let tau = brent(|tau| Ok(at(tau)?[c] - level), 0.0, h, EVENT_TOL, 200)?;
    Ok((tau, at(tau)?))
}

/// Integrate the unit-speed geodesic from `start` for arclength `length`.
///
/// Every accepted step is recorded. The velocity is rescaled to unit speed
/// after each step; `J` is left free so its drift measures the integrator.
pub fn trace(warp: &Warp, start: StripState, length: f64, tol: f64) -> Result<GeodesicPath> {
    start.check(warp)?;
    finite(length, "length")?;
    finite(tol, "tolerance")?;
    if !(length > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "trace needs length > 0 and tol > 0 (length = {length}, tol = {tol})"
        )));
    }
    // a turning radius beyond the table leaves the path unclassified
    let class = if start.r == 0.0 {
        match classify(warp, start, tol) {
            Ok(c) => Some(c),
            Err(Error::Bracket(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let j0 = clairaut(warp, &start)?;
    let drift_limit = 1e3 * tol * (1.0 + j0.abs());
    let f = flow(warp);
    let inner = tol * TRACE_TOL_FACTOR;
    let stepper = Stepper::new(StepControl::new(inner, inner).with_h_max(MAX_TRACE_STEP));

    let mut path = GeodesicPath {
        start,
        j: j0,
        samples: vec![PathSample {
            s: 0.0,
            state: start,
            j_drift: 0.0,
        }],
        turning_points: Vec::new(),
        axis_crossings: Vec::new(),
        class,
        max_j_drift: 0.0,
        max_speed_defect: 0.0,
    };
    let (mut s, mut u, mut h) = (0.0, start.to_array(), 0.01f64.min(length));
    while s < length {
        let acc = stepper.step(&f, s, &u, h, Some(length - s))?;
        let mut next = acc.y;
        // events are located on the unnormalised flow from u
        if u[2] != 0.0 && u[2].signum() != next[2].signum() && next[2] != 0.0 {
            let (tau, ev) = locate(&f, s, &u, acc.h, 2, 0.0)?;
            path.turning_points.push(PathEvent {
                s: s + tau,
                state: StripState::from_array(ev),
            });
        }
        if u[0] * next[0] < 0.0 {
            let (tau, ev) = locate(&f, s, &u, acc.h, 0, 0.0)?;
            path.axis_crossings.push(PathEvent {
                s: s + tau,
                state: StripState::from_array(ev),
            });
        }
        let fb = warp.fiber(next[0])?;
        let speed2 = next[2] * next[2] + fb.h * fb.h * next[3] * next[3];
        path.max_speed_defect = path.max_speed_defect.max((speed2 - 1.0).abs());
        let scale = speed2.sqrt().recip();
        next[2] *= scale;
        next[3] *= scale;

        s = if acc.h == length - s { length } else { s + acc.h };
        u = next;
        h = acc.h_next;
        let state = StripState::from_array(u);
        let drift = clairaut(warp, &state)? - j0;
        if drift.abs() > drift_limit {
            return Err(Error::InvariantViolation(format!(
                "Clairaut drift {drift:e} at s = {s} exceeds {drift_limit:e}"
            )));
        }
        path.max_j_drift = path.max_j_drift.max(drift.abs());
        path.samples.push(PathSample {
            s,
            state,
            j_drift: drift,
        });
    }
    for tp in &path.turning_points {
        let mismatch = (warp.fiber(tp.state.r)?.h - j0.abs()).abs();
        if mismatch > TURNING_TOL {
            return Err(Error::InvariantViolation(format!(
                "turning point at s = {} has |h - |J|| = {mismatch:e}",
                tp.s
            )));
        }
    }
    Ok(path)
}

/// Classify the geodesic leaving the axis with velocity `start`.
pub fn classify(warp: &Warp, start: StripState, tol: f64) -> Result<Classification> {
    start.check(warp)?;
    if start.r != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "classification needs a start on the axis, got r = {}",
            start.r
        )));
    }
    let j = clairaut(warp, &start)?;
    let h0 = warp.h0();
    if j == 0.0 {
        return Ok(Classification::RadialRay);
    }
    if start.dr == 0.0 || (j.abs() - h0).abs() <= 4.0 * f64::EPSILON * h0 {
        return Ok(Classification::AxisClosed);
    }
    Ok(Classification::Oscillating(half_oscillation(warp, j, tol)?))
}

/// Turning radius and per-half-oscillation quadratures for `0 < |J| < h(0)`.
pub fn half_oscillation(warp: &Warp, j: f64, tol: f64) -> Result<OscillationData> {
    finite(j, "Clairaut constant")?;
    finite(tol, "tolerance")?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let rho = warp.turning_radius(j)?;
    let q = ClairautQuad::new(warp, rho)?;
    let [dy, excess] = q.integrals(rho, tol)?;
    Ok(OscillationData {
        j,
        r_star: rho,
        delta_y: 2.0 * j.signum() * dy,
        delta_s: 2.0 * (rho + excess),
    })
}

/// Quadratures of the Clairaut integrands for the geodesic whose turning
/// radius is `rho` (so `J = h(rho)`).
///
/// With `N = h(r) - J` and `D = 1 - J²/h² = N(N + 2J)/(J + N)²`, the fiber
/// advance integrand is `J / (h² √D)` and the arclength excess integrand is
/// `1/√D - 1`. The substitution `r = rho·sin ξ` removes the inverse square
/// root at `rho`, and `N` is integrated from `h'` near `rho` so it keeps
/// full relative accuracy.
pub(crate) struct ClairautQuad<'a> {
    warp: &'a Warp,
    rho: f64,
    j: f64,
}

impl<'a> ClairautQuad<'a> {
    pub(crate) fn new(warp: &'a Warp, rho: f64) -> Result<ClairautQuad<'a>> {
        finite(rho, "turning radius")?;
        if !(rho > 0.0) || !warp.decays() {
            return Err(Error::InvalidArgument(format!(
                "turning radius must be positive on a decaying family, got {rho}"
            )));
        }
        let j = warp.h(rho)?;
        Ok(ClairautQuad { warp, rho, j })
    }

    pub(crate) fn j(&self) -> f64 {
        self.j
    }

    /// `h(r) - h(rho)` for `r = rho - delta`, `0 <= delta <= rho`.
    fn gap(&self, r: f64, delta: f64) -> Result<f64> {
        if delta <= 0.0 {
            return Ok(0.0);
        }
        if delta < 0.25 * self.rho || self.rho < 0.5 {
            gauss_legendre_10(|v| Ok(-self.warp.fiber(self.rho - v)?.dh), 0.0, delta)
        } else {
            Ok(self.warp.h(r)? - self.j)
        }
    }

    /// `[J/(h²√D), 1/√D - 1]` at radius `r = rho - delta` (unsubstituted).
    fn integrand(&self, r: f64, delta: f64) -> Result<[f64; 2]> {
        let n = self.gap(r, delta)?;
        if !(n > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "fiber size not above J at r = {r} < r* = {}",
                self.rho
            )));
        }
        let h = self.j + n;
        let d = n * (n + 2.0 * self.j) / (h * h);
        let sd = d.sqrt();
        let ratio = self.j / h;
        Ok([self.j / (h * h * sd), ratio * ratio / (sd * (1.0 + sd))])
    }

    /// `[∫₀ᵘ J/(h²√D) dr, ∫₀ᵘ (1/√D - 1) dr]` for `0 <= upper <= rho`.
    pub(crate) fn integrals(&self, upper: f64, tol: f64) -> Result<[f64; 2]> {
        if !(0.0..=self.rho).contains(&upper) {
            return Err(Error::InvalidArgument(format!(
                "upper limit {upper} outside [0, r* = {}]",
                self.rho
            )));
        }
        let xi_max = if upper >= self.rho {
            std::f64::consts::FRAC_PI_2
        } else {
            (upper / self.rho).asin()
        };
        let res = integrate(
            |xi: f64| {
                let (sin, cos) = xi.sin_cos();
                let jac = self.rho * cos;
                // rho - r without cancellation near the turning point
                let delta = self.rho * cos * cos / (1.0 + sin);
                let [a, b] = self.integrand(self.rho * sin, delta)?;
                Ok([a * jac, b * jac])
            },
            0.0,
            xi_max,
            QuadTol::new(tol, tol * 1e-3),
        )?;
        Ok(res.value)
    }
}

/// `[∫₀ᵘ J/(h²√D) dr, ∫₀ᵘ (1/√D - 1) dr]` for a `J` whose geodesic does not
/// turn before `upper` (`h > |J|` on `[0, upper]`).
pub(crate) fn open_integrals(warp: &Warp, j: f64, upper: f64, tol: f64) -> Result<[f64; 2]> {
    let res = integrate(
        |r: f64| {
            let h = warp.h(r)?;
            let ratio = j / h;
            let d = 1.0 - ratio * ratio;
            if !(d > 0.0) {
                return Err(Error::InvariantViolation(format!("geodesic turns before r = {r}")));
            }
            let sd = d.sqrt();
            Ok([j / (h * h * sd), ratio * ratio / (sd * (1.0 + sd))])
        },
        0.0,
        upper,
        QuadTol::new(tol, tol * 1e-3),
    )?;
    Ok(res.value)
}
