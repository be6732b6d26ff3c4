//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature for small
//! vector-valued integrands, plus a fixed 10-point Gauss-Legendre rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Integral estimate with its error estimate, one entry per component.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const M: usize> {
    pub value: [f64; M],
    pub error: [f64; M],
    pub intervals: usize,
}

/// Tolerances: a component converges when its error estimate is below
/// `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTol {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl QuadTol {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        QuadTol {
            rel_tol,
            abs_tol,
            max_intervals: 4000,
        }
    }
}

fn rescale(diff: f64, resasc: f64, resabs: f64) -> f64 {
    let mut err = diff.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor > err {
        err = floor;
    }
    err
}

fn gk21<const M: usize, F>(f: &F, a: f64, b: f64) -> Result<([f64; M], [f64; M])>
where
    F: Fn(f64) -> Result<[f64; M]>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = [0.0; M];
    let mut gauss = [0.0; M];
    let mut fv1 = [[0.0; M]; 10];
    let mut fv2 = [[0.0; M]; 10];
    for c in 0..M {
        kron[c] = fc[c] * WGK[10];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        for c in 0..M {
            kron[c] += WGK[j] * (f1[c] + f2[c]);
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * (f1[c] + f2[c]);
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }
    let mut err = [0.0; M];
    for c in 0..M {
        let mean = 0.5 * kron[c];
        let mut resabs = WGK[10] * fc[c].abs();
        let mut resasc = WGK[10] * (fc[c] - mean).abs();
        for j in 0..10 {
            resabs += WGK[j] * (fv1[j][c].abs() + fv2[j][c].abs());
            resasc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        err[c] = rescale((kron[c] - gauss[c]) * half, resasc * half.abs(), resabs * half.abs());
        kron[c] *= half;
    }
    Ok((kron, err))
}

struct Piece<const M: usize> {
    a: f64,
    b: f64,
    value: [f64; M],
    error: [f64; M],
    key: f64,
}

impl<const M: usize> PartialEq for Piece<M> {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}
impl<const M: usize> Eq for Piece<M> {}
impl<const M: usize> PartialOrd for Piece<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Piece<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

/// Integrate `f` over `[a, b]`. The integrand must be finite at interior
/// points; endpoints are never sampled.
pub fn integrate<const M: usize, F>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<QuadResult<M>>
where
    F: Fn(f64) -> Result<[f64; M]>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("quadrature bounds"));
    }
    if a == b {
        return Ok(QuadResult {
            value: [0.0; M],
            error: [0.0; M],
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; M];
    let mut total_err = [0.0; M];

    let weight = |value: &[f64; M], error: &[f64; M]| -> f64 {
        (0..M)
            .map(|c| error[c] / tol.abs_tol.max(tol.rel_tol * value[c].abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };

    let (v, e) = gk21(&f, a, b)?;
    total = add(total, v);
    total_err = add(total_err, e);
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
        key: weight(&v, &e),
    });

    let converged = |total: &[f64; M], total_err: &[f64; M]| {
        (0..M).all(|c| total_err[c] <= tol.abs_tol.max(tol.rel_tol * total[c].abs()))
    };

    while !converged(&total, &total_err) {
        if heap.len() >= tol.max_intervals {
            let worst = (0..M).map(|c| total_err[c]).fold(0.0, f64::max);
            return Err(Error::QuadratureNonConvergence {
                tol: tol.rel_tol,
                err: worst,
            });
        }
        let piece = heap.pop().expect("heap holds at least one interval");
        let mid = 0.5 * (piece.a + piece.b);
        if mid <= piece.a.min(piece.b) || mid >= piece.a.max(piece.b) {
            // interval cannot be split further in floating point
            let worst = (0..M).map(|c| total_err[c]).fold(0.0, f64::max);
            return Err(Error::QuadratureNonConvergence {
                tol: tol.rel_tol,
                err: worst,
            });
        }
        let (v1, e1) = gk21(&f, piece.a, mid)?;
        let (v2, e2) = gk21(&f, mid, piece.b)?;
        for c in 0..M {
            total[c] += v1[c] + v2[c] - piece.value[c];
            total_err[c] += e1[c] + e2[c] - piece.error[c];
        }
        heap.push(Piece {
            a: piece.a,
            b: mid,
            value: v1,
            error: e1,
            key: weight(&v1, &e1),
        });
        heap.push(Piece {
            a: mid,
            b: piece.b,
            value: v2,
            error: e2,
            key: weight(&v2, &e2),
        });
    }

    // Re-sum to shed the drift of the running totals.
    let mut value = [0.0; M];
    let mut error = [0.0; M];
    let intervals = heap.len();
    for p in heap.into_iter() {
        value = add(value, p.value);
        error = add(error, p.error);
    }
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = integrate(|x| f(x).map(|v| [v]), a, b, tol)?;
    Ok((r.value[0], r.error[0]))
}

/// Fixed 10-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre_10<F>(f: F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for j in 0..5 {
        let dx = half * XGK[2 * j + 1];
        acc += WG[j] * (f(center - dx)? + f(center + dx)?);
    }
    Ok(acc * half)
}

fn add<const M: usize>(mut a: [f64; M], b: [f64; M]) -> [f64; M] {
    for c in 0..M {
        a[c] += b[c];
    }
    a
}
