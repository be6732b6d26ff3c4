//! Busemann estimates along the radial ray, non-properness certificates and
//! cone probes.
//!
//! For the orbit point `q = γˡ p̃` and the radial ray `c(T) = (T, 0)` the
//! estimate is `b̂(T) = T - d(q, c(T))`. The parallel path from the axis
//! gives `-2πl·h(T) <= b̂(T) <= 0`, so for a decaying fiber `b̂ → 0` along the
//! whole orbit while `L(l) = d(p̃, γˡ p̃)` grows: the zero level set of the
//! Busemann function is unbounded.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{distance_axis, distance_axis_to_point};
use crate::error::{finite, Error, Result};
use crate::warp::Warp;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusemannRow {
    pub t: f64,
    /// `T - d(q, c(T))`; absent when the solver only returned bounds.
    pub b_hat: Option<f64>,
    /// Interval from the distance bounds, clipped to the sandwich.
    pub b_low: f64,
    pub b_high: f64,
    /// `-2πl·h(T)`.
    pub bound_low: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusemannSeries {
    pub l: i64,
    pub rows: Vec<BusemannRow>,
    /// `b̂` is non-decreasing in `T` (within the solver tolerance).
    pub monotone: bool,
}

fn sandwich_low(warp: &Warp, l: i64, t: f64) -> Result<f64> {
    Ok(-2.0 * PI * l.unsigned_abs() as f64 * warp.h(t)?)
}

fn busemann_row(warp: &Warp, l: i64, t: f64, tol: f64) -> Result<BusemannRow> {
    let bound_low = sandwich_low(warp, l, t)?;
    let row = match distance_axis_to_point(warp, l, t, tol) {
        Ok(d) if !d.degraded => BusemannRow {
            t,
            b_hat: Some((t - d.value).clamp(bound_low, 0.0)),
            b_low: (t - d.upper_bound).clamp(bound_low, 0.0),
            b_high: (t - d.lower_bound).clamp(bound_low, 0.0),
            bound_low,
        },
        Ok(_) | Err(Error::Bracket(_) | Error::QuadratureNonConvergence { .. } | Error::InvariantViolation(_)) => {
            BusemannRow {
                t,
                b_hat: None,
                b_low: bound_low,
                b_high: 0.0,
                bound_low,
            }
        }
        Err(e) => return Err(e),
    };
    Ok(row)
}

/// `b̂(T)` for `q = γˡ p̃` at every `T` of an increasing positive list.
pub fn busemann_estimate(warp: &Warp, l: i64, t_list: &[f64], tol: f64) -> Result<BusemannSeries> {
    for &t in t_list {
        finite(t, "T")?;
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("T values must be positive, got {t}")));
        }
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("T values must be increasing".into()));
    }
    let rows = t_list
        .par_iter()
        .map(|&t| busemann_row(warp, l, t, tol))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().filter_map(|r| r.b_hat).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 2.0 * tol);
    Ok(BusemannSeries { l, rows, monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateRow {
    pub l: i64,
    pub length: f64,
    pub length_low: f64,
    pub length_high: f64,
    pub b_hat: Option<f64>,
    pub b_low: f64,
    pub b_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonProperEvidence,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::NonProperEvidence => "non-proper evidence",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonProperCertificate {
    /// Scale the evidence refers to; nothing is claimed about the limit.
    pub scale: String,
    pub t_max: f64,
    pub epsilon: f64,
    pub rows: Vec<CertificateRow>,
    pub lengths_increasing: bool,
    pub intervals_within_epsilon: bool,
    pub verdict: &'static str,
}

/// Orbit rows `(L(l), b̂(T_max))` for every `l` in `l_set`.
///
/// The verdict is "non-proper evidence" when `L` is strictly increasing
/// (interval-wise) and every `b̂` interval lies in `[-ε, 0]`.
pub fn nonproper_certificate(
    warp: &Warp,
    l_set: &[i64],
    t_max: f64,
    epsilon: f64,
    tol: f64,
) -> Result<NonProperCertificate> {
    if !warp.decays() {
        return Err(Error::NotApplicable(format!(
            "the {} fiber does not decay, so orbit points are not on a common level set",
            warp.family()
        )));
    }
    finite(t_max, "T_max")?;
    finite(epsilon, "epsilon")?;
    if !(t_max > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("T_max and epsilon must be positive".into()));
    }
    let mut ls = l_set.to_vec();
    if ls.iter().any(|&l| l < 0) {
        return Err(Error::InvalidArgument("orbit indices must be >= 0".into()));
    }
    ls.sort_unstable();
    ls.dedup();
    let l_max = ls.last().copied().unwrap_or(0);
    let bound = -sandwich_low(warp, l_max, t_max)?;
    if bound > epsilon {
        return Err(Error::TmaxTooSmall { bound, epsilon });
    }
    let rows = ls
        .par_iter()
        .map(|&l| {
            let len = distance_axis(warp, l, tol)?;
            let b = busemann_row(warp, l, t_max, tol)?;
            Ok(CertificateRow {
                l,
                length: len.value,
                length_low: len.lower_bound,
                length_high: len.upper_bound,
                b_hat: b.b_hat,
                b_low: b.b_low,
                b_high: b.b_high,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lengths_increasing = rows.windows(2).all(|w| w[1].length_low > w[0].length_high);
    let intervals_within_epsilon = rows.iter().all(|r| r.b_low >= -epsilon && r.b_high <= 0.0);
    let verdict = if lengths_increasing && intervals_within_epsilon {
        Verdict::NonProperEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(NonProperCertificate {
        scale: format!("T_max = {t_max}, l in [{}, {l_max}]", ls.first().copied().unwrap_or(0)),
        t_max,
        epsilon,
        rows,
        lengths_increasing,
        intervals_within_epsilon,
        verdict: verdict.label(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeRow {
    pub l: i64,
    pub length: f64,
    /// Turning radius of the minimiser (0 for the axis circle).
    pub radius: f64,
    pub radius_over_length: f64,
    /// `L(2l) / (2L(l))`.
    pub additivity: f64,
}

/// Cone rows for dyadic `l`; `L(2l)` is computed alongside each `L(l)`.
pub fn cone_probe(warp: &Warp, l_list: &[i64], tol: f64) -> Result<Vec<ConeRow>> {
    if let Some(&l) = l_list.iter().find(|&&l| l < 1 || l.count_ones() != 1) {
        return Err(Error::InvalidArgument(format!(
            "cone probe needs powers of two, got {l}"
        )));
    }
    let mut ls = l_list.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let mut needed: Vec<i64> = ls.iter().flat_map(|&l| [l, 2 * l]).collect();
    needed.sort_unstable();
    needed.dedup();
    let results = needed
        .par_iter()
        .map(|&l| distance_axis(warp, l, tol))
        .collect::<Result<Vec<_>>>()?;
    let lookup = |l: i64| &results[needed.binary_search(&l).expect("computed")];
    Ok(ls
        .iter()
        .map(|&l| {
            let d = lookup(l);
            let radius = d.geodesic.and_then(|g| g.r_star).unwrap_or(0.0);
            ConeRow {
                l,
                length: d.value,
                radius,
                radius_over_length: radius / d.value,
                additivity: lookup(2 * l).value / (2.0 * d.value),
            }
        })
        .collect())
}

/// Trend checks over cone rows ordered by `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeTrends {
    pub additivity_at_most_one: bool,
    /// `1 - A(l)` non-increasing, each step allowed to rise by `step_tol`.
    pub defect_non_increasing: bool,
    /// `R/L` non-increasing, each step allowed to rise by `step_tol`.
    pub ratio_non_increasing: bool,
    pub ratio_final_below_initial: bool,
    pub radius_within_half_length: bool,
}

impl ConeTrends {
    pub fn all(&self) -> bool {
        self.additivity_at_most_one
            && self.defect_non_increasing
            && self.ratio_non_increasing
            && self.ratio_final_below_initial
            && self.radius_within_half_length
    }
}

pub fn cone_trends(rows: &[ConeRow], step_tol: f64) -> ConeTrends {
    let defect: Vec<f64> = rows.iter().map(|r| 1.0 - r.additivity).collect();
    let ratio: Vec<f64> = rows.iter().map(|r| r.radius_over_length).collect();
    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + step_tol);
    ConeTrends {
        additivity_at_most_one: rows.iter().all(|r| r.additivity > 0.0 && r.additivity <= 1.0),
        defect_non_increasing: non_increasing(&defect),
        ratio_non_increasing: non_increasing(&ratio),
        ratio_final_below_initial: matches!((ratio.first(), ratio.last()), (Some(a), Some(b)) if b < a),
        radius_within_half_length: rows.iter().all(|r| r.radius <= 0.5 * r.length),
    }
}
