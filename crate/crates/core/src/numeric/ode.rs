//! Dormand-Prince 5(4) integrator with step-size control.
//!
//! The stepper is deliberately low level: callers drive the loop so they can
//! post-process accepted states (projection, event location by re-stepping)
//! without fighting an opaque driver.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// b - b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and step bounds for [`Stepper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64) -> Self {
        StepControl {
            rtol,
            atol,
            h_min: 1e-14,
            h_max: f64::INFINITY,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// Result of one accepted adaptive step.
#[derive(Debug, Clone, Copy)]
pub struct Accepted<const N: usize> {
    pub h: f64,
    pub y: [f64; N],
    pub h_next: f64,
}

/// Single Dormand-Prince step of size `h` from `(t, y)`. Returns the fifth
/// order solution and the embedded error vector.
pub fn dopri_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(t, y)?;
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    let k2 = f(t + C2 * h, &tmp)?;
    for i in 0..N {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let k3 = f(t + C3 * h, &tmp)?;
    for i in 0..N {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let k4 = f(t + C4 * h, &tmp)?;
    for i in 0..N {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let k5 = f(t + C5 * h, &tmp)?;
    for i in 0..N {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let k6 = f(t + h, &tmp)?;
    let mut y_new = [0.0; N];
    for i in 0..N {
        y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    let k7 = f(t + h, &y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok((y_new, err))
}

/// Adaptive stepper. Rejected steps shrink `h` and retry; the accepted step
/// reports the step actually taken and a proposal for the next one.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    pub control: StepControl,
}

impl Stepper {
    pub fn new(control: StepControl) -> Self {
        Stepper { control }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.control.atol + self.control.rtol * y[i].abs().max(y_new[i].abs());
            let e = err[i] / sc;
            acc += e * e;
        }
        (acc / N as f64).sqrt()
    }

    /// Take one accepted step of size at most `h` (and at most `h_limit`, if
    /// given, so callers can land exactly on an output point).
    pub fn step<const N: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[f64; N],
        h: f64,
        h_limit: Option<f64>,
    ) -> Result<Accepted<N>>
    where
        F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let mut h = h.min(self.control.h_max);
        if let Some(lim) = h_limit {
            h = h.min(lim);
        }
        loop {
            if h < self.control.h_min {
                return Err(Error::StepUnderflow { t });
            }
            let (y_new, err) = dopri_step(f, t, y, h)?;
            let norm = self.error_norm(y, &y_new, &err);
            if !norm.is_finite() {
                h *= 0.25;
                continue;
            }
            if norm <= 1.0 {
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                return Ok(Accepted {
                    h,
                    y: y_new,
                    h_next: (h * factor).min(self.control.h_max),
                });
            }
            h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
}
