//! Ricci curvature of `g = dr² + f² ds²_{k-1} + h² ds²_1`.
//!
//! [`ricci_closed`] evaluates the three warped-product formulas directly.
//! [`ricci_fd_oracle`] rebuilds the metric in hyperspherical coordinates and
//! differentiates it numerically, sharing nothing with the closed forms
//! except the warp samples themselves.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::warp::{Warp, WarpFamily, WarpSample};

/// The three Ricci values at one radius: `H = ∂r`, `U` unit tangent to
/// `S^{k-1}`, `V` unit tangent to `S¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RicciSample {
    pub r: f64,
    pub k: usize,
    pub ric_hh: f64,
    pub ric_uu: f64,
    pub ric_vv: f64,
}

impl RicciSample {
    pub fn components(&self) -> [f64; 3] {
        [self.ric_hh, self.ric_uu, self.ric_vv]
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    Ok(())
}

/// Closed-form Ricci curvatures. The `0/0` quotients at the origin come
/// pre-evaluated in `sample.quotients`.
pub fn ricci_closed(sample: &WarpSample, k: usize) -> Result<RicciSample> {
    check_k(k)?;
    for (v, what) in [
        (sample.r, "radius"),
        (sample.h, "h"),
        (sample.d2h, "h''"),
        (sample.quotients.d2f_over_f, "f''/f"),
        (sample.quotients.defect_over_f2, "(1-f'^2)/f^2"),
        (sample.quotients.dfdh_over_fh, "f'h'/(fh)"),
    ] {
        finite(v, what)?;
    }
    if sample.r < 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be >= 0, got {}", sample.r)));
    }
    let q = sample.quotients;
    let km1 = (k - 1) as f64;
    let km2 = (k - 2) as f64;
    let h_term = -sample.d2h / sample.h;
    Ok(RicciSample {
        r: sample.r,
        k,
        ric_hh: h_term - km1 * q.d2f_over_f,
        ric_uu: -q.d2f_over_f + km2 * q.defect_over_f2 - q.dfdh_over_fh,
        ric_vv: h_term - km1 * q.dfdh_over_fh,
    })
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

/// Largest sphere dimension parameter the oracle accepts.
pub const ORACLE_MAX_K: usize = 15;
/// Polar angles must keep this distance from `0` and `π`.
pub const POLE_MARGIN: f64 = 0.4;

/// Oracle output: the Ricci sample plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSample {
    pub ricci: RicciSample,
    /// `max |R̂_ij - R̂_ji|` in orthonormalised coordinates.
    pub asymmetry: f64,
    /// Largest difference between the step and half-step estimates.
    pub richardson_mismatch: f64,
}

type Matrix = Vec<Vec<f64>>;

/// Diagonal metric of the warped product in coordinates
/// `(r, θ_1, …, θ_{k-1}, y)`, where `θ_1..θ_{k-2}` are polar angles and
/// `θ_{k-1}` is the azimuth.
struct CoordinateMetric<'a> {
    warp: &'a Warp,
    k: usize,
}

impl CoordinateMetric<'_> {
    fn dim(&self) -> usize {
        self.k + 1
    }

    fn metric(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let s = self.warp.sample(x[0])?;
        let mut g = vec![vec![0.0; n]; n];
        g[0][0] = 1.0;
        let mut sphere = s.f * s.f;
        for i in 1..self.k {
            g[i][i] = sphere;
            let sin = x[i].sin();
            sphere *= sin * sin;
        }
        g[n - 1][n - 1] = s.h * s.h;
        Ok(g)
    }

    /// Radial differences use a step proportional to the radius: the sphere
    /// factor varies on the scale of `r`, so truncation and roundoff stay
    /// balanced at every radius. Angles use the base step.
    fn step_for(&self, x: &[f64], c: usize, step: f64) -> f64 {
        if c == 0 {
            step * x[0]
        } else {
            step
        }
    }

    fn christoffel(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        let g = self.metric(x)?;
        let g_inv = invert(&g)?;
        // dg[c][a][b] = ∂_c g_ab
        let mut dg = vec![vec![vec![0.0; n]; n]; n];
        let mut xp = x.to_vec();
        for c in 0..n {
            let dc = self.step_for(x, c, step);
            xp[c] = x[c] + dc;
            let gp = self.metric(&xp)?;
            xp[c] = x[c] - dc;
            let gm = self.metric(&xp)?;
            xp[c] = x[c];
            for a in 0..n {
                for b in 0..n {
                    dg[c][a][b] = (gp[a][b] - gm[a][b]) / (2.0 * dc);
                }
            }
        }
        let mut gamma = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for d in 0..n {
                        if g_inv[a][d] != 0.0 {
                            acc += g_inv[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                        }
                    }
                    gamma[(a * n + b) * n + c] = 0.5 * acc;
                }
            }
        }
        Ok(gamma)
    }

    /// Ricci tensor plus, per entry, the sum of absolute values of the terms
    /// contracted into it (the scale against which cancellation is judged).
    fn ricci_tensor(&self, x: &[f64], step: f64) -> Result<(Matrix, Matrix)> {
        let n = self.dim();
        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let gamma = self.christoffel(x, step)?;
        // dgamma[e] = ∂_e Γ
        let mut dgamma = Vec::with_capacity(n);
        let mut xp = x.to_vec();
        for e in 0..n {
            let de = self.step_for(x, e, step);
            xp[e] = x[e] + de;
            let gp = self.christoffel(&xp, step)?;
            xp[e] = x[e] - de;
            let gm = self.christoffel(&xp, step)?;
            xp[e] = x[e];
            dgamma.push(
                gp.iter()
                    .zip(&gm)
                    .map(|(p, m)| (p - m) / (2.0 * de))
                    .collect::<Vec<_>>(),
            );
        }
        let mut ric = vec![vec![0.0; n]; n];
        let mut scale = vec![vec![0.0; n]; n];
        for b in 0..n {
            for d in 0..n {
                let (mut acc, mut mag) = (0.0, 0.0);
                for a in 0..n {
                    let (p, q) = (dgamma[a][idx(a, b, d)], dgamma[d][idx(a, b, a)]);
                    acc += p - q;
                    mag += p.abs() + q.abs();
                    for e in 0..n {
                        let p = gamma[idx(a, a, e)] * gamma[idx(e, b, d)];
                        let q = gamma[idx(a, d, e)] * gamma[idx(e, a, b)];
                        acc += p - q;
                        mag += p.abs() + q.abs();
                    }
                }
                ric[b][d] = acc;
                scale[b][d] = mag;
            }
        }
        Ok((ric, scale))
    }
}

/// Gauss-Jordan inverse with partial pivoting; rejects near-singular input.
fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut smallest = f64::INFINITY;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        smallest = smallest.min(p.abs());
        if p == 0.0 || scale / p.abs() > 1e12 {
            return Err(Error::IllConditioned(if p == 0.0 {
                f64::INFINITY
            } else {
                scale / p.abs()
            }));
        }
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col && a[i][col] != 0.0 {
                let factor = a[i][col];
                for j in 0..n {
                    a[i][j] -= factor * a[col][j];
                    inv[i][j] -= factor * inv[col][j];
                }
            }
        }
    }
    debug_assert!(smallest > 0.0);
    Ok(inv)
}

/// Default oracle step.
pub const DEFAULT_ORACLE_STEP: f64 = 1e-3;

/// Finite-difference Ricci curvature at `(r, angles)`.
///
/// `angles` holds the `k - 1` sphere coordinates. The returned values are
/// the tensor evaluated on unit vectors along `∂r`, `∂θ_1` and `∂y`,
/// Richardson-extrapolated from `step` and `step / 2`. Angular increments
/// are `step`; the radial increment is `step * r`.
pub fn ricci_fd_oracle(warp: &Warp, k: usize, r: f64, angles: &[f64], step: f64) -> Result<OracleSample> {
    check_k(k)?;
    if k > ORACLE_MAX_K {
        return Err(Error::InvalidArgument(format!(
            "oracle supports k <= {ORACLE_MAX_K}, got {k}"
        )));
    }
    finite(r, "radius")?;
    finite(step, "step")?;
    if !(step > 0.0) || r < 5.0 * step {
        return Err(Error::InvalidArgument(format!(
            "oracle needs step > 0 and r >= 5*step (r = {r}, step = {step})"
        )));
    }
    if angles.len() != k - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} sphere angles, got {}",
            k - 1,
            angles.len()
        )));
    }
    let polar = &angles[..k - 2];
    if polar
        .iter()
        .any(|&t| !(POLE_MARGIN..=std::f64::consts::PI - POLE_MARGIN).contains(&t))
    {
        return Err(Error::PoleProximity);
    }
    let cm = CoordinateMetric { warp, k };
    let n = cm.dim();
    let mut x = Vec::with_capacity(n);
    x.push(r);
    x.extend_from_slice(angles);
    x.push(0.0);

    let g = cm.metric(&x)?;
    let project = |ric: &[Vec<f64>]| -> [f64; 3] {
        [
            ric[0][0] / g[0][0],
            ric[1][1] / g[1][1],
            ric[n - 1][n - 1] / g[n - 1][n - 1],
        ]
    };
    let (coarse, scale) = cm.ricci_tensor(&x, step)?;
    let (fine, _) = cm.ricci_tensor(&x, 0.5 * step)?;
    let (vc, vf, mag) = (project(&coarse), project(&fine), project(&scale));
    let mut mismatch = 0.0f64;
    for i in 0..3 {
        let diff = (vc[i] - vf[i]).abs();
        let budget = 1e-4 * mag[i] + 1e-7;
        if diff > 10.0 * budget {
            return Err(Error::Cancellation { mismatch: diff, budget });
        }
        mismatch = mismatch.max(diff);
    }
    // The leading truncation term is O(step²); cancel it.
    let v: [f64; 3] = std::array::from_fn(|i| (4.0 * vf[i] - vc[i]) / 3.0);
    let mut asymmetry = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            let norm = (g[i][i] * g[j][j]).sqrt();
            asymmetry = asymmetry.max((coarse[i][j] - coarse[j][i]).abs() / norm);
        }
    }
    Ok(OracleSample {
        ricci: RicciSample {
            r,
            k,
            ric_hh: v[0],
            ric_uu: v[1],
            ric_vv: v[2],
        },
        asymmetry,
        richardson_mismatch: mismatch,
    })
}

/// Default oracle coordinate point: every polar angle at 1.1, azimuth 0.3.
pub fn default_angles(k: usize) -> Vec<f64> {
    let mut a = vec![1.1; k.saturating_sub(2)];
    if k >= 2 {
        a.push(0.3);
    }
    a
}

// ---------------------------------------------------------------------------
// Positivity scan

/// Uniform radius grid `start, start + step, …` up to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl RadiusGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<RadiusGrid> {
        if !(start.is_finite() && end.is_finite() && step.is_finite()) {
            return Err(Error::NonFinite("radius grid"));
        }
        if start < 0.0 || end < start || step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid radius grid [{start}, {end}] step {step}"
            )));
        }
        Ok(RadiusGrid { start, end, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Component minimum and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub value: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub family: WarpFamily,
    pub k: usize,
    pub grid: RadiusGrid,
    pub margin: f64,
    pub min_hh: Minimum,
    pub min_uu: Minimum,
    pub min_vv: Minimum,
    pub positive: bool,
    #[serde(skip)]
    pub samples: Vec<RicciSample>,
}

/// Positivity margin used when none is given.
pub const DEFAULT_MARGIN: f64 = 1e-12;

/// Evaluate [`ricci_closed`] over `grid` and report component minima.
pub fn positivity_scan(warp: &Warp, k: usize, grid: RadiusGrid, margin: f64) -> Result<CurvatureReport> {
    check_k(k)?;
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument("positivity margin must be > 0".into()));
    }
    let samples = grid
        .points()
        .into_par_iter()
        .map(|r| ricci_closed(&warp.sample(r)?, k))
        .collect::<Result<Vec<_>>>()?;
    let min_of = |pick: fn(&RicciSample) -> f64| {
        samples.iter().fold(
            Minimum {
                value: f64::INFINITY,
                r: f64::NAN,
            },
            |m, s| {
                if pick(s) < m.value {
                    Minimum { value: pick(s), r: s.r }
                } else {
                    m
                }
            },
        )
    };
    let min_hh = min_of(|s| s.ric_hh);
    let min_uu = min_of(|s| s.ric_uu);
    let min_vv = min_of(|s| s.ric_vv);
    let positive = min_hh.value > margin && min_uu.value > margin && min_vv.value > margin;
    Ok(CurvatureReport {
        family: warp.family(),
        k,
        grid,
        margin,
        min_hh,
        min_uu,
        min_vv,
        positive,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_k_and_bad_oracle_points() {
        let w = Warp::theorem_b();
        let s = w.sample(1.0).unwrap();
        assert!(ricci_closed(&s, 1).is_err());
        assert!(matches!(
            ricci_fd_oracle(&w, 4, 1.0, &[0.1, 1.0, 0.3], 1e-4),
            Err(Error::PoleProximity)
        ));
        assert!(ricci_fd_oracle(&w, 4, 1e-4, &default_angles(4), 1e-4).is_err());
        assert!(ricci_fd_oracle(&w, 16, 1.0, &default_angles(16), 1e-4).is_err());
        assert!(ricci_fd_oracle(&w, 4, 1.0, &[1.0], 1e-4).is_err());
    }

    #[test]
    fn inverse_detects_singular_matrix() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 1e-15]];
        assert!(matches!(invert(&m), Err(Error::IllConditioned(_))));
        let m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let inv = invert(&m).unwrap();
        assert!((inv[0][0] - 0.6).abs() < 1e-15 && (inv[0][1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn too_small_step_trips_cancellation_detector() {
        let w = Warp::theorem_b();
        let res = ricci_fd_oracle(&w, 4, 1.0, &default_angles(4), 1e-8);
        assert!(matches!(res, Err(Error::Cancellation { .. })), "{res:?}");
    }

    #[test]
    fn grid_points_are_inclusive() {
        let g = RadiusGrid::new(0.0, 100.0, 0.1).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 1001);
        assert!((p[1000] - 100.0).abs() < 1e-12);
    }
}
