//! Adaptive Dormand–Prince 5(4) integrator for real first-order systems.

use crate::error::{Error, Result};

/// Step-control settings.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 2_000_000,
        }
    }
}

/// Step counts of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights equal the last row of A (first same as last)
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`, overwriting `y`.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y: &mut [f64], opts: OdeOptions) -> Result<OdeStats>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("integration interval [{t0}, {t1}] is empty")));
    }
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut h = ((t1 - t0) * 1e-3).min(1e-2);
    f(t, y, &mut k[0]);
    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Ode(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * d5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((h * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
            stats.rejected += 1;
            h *= 0.25;
        } else if err <= 1.0 {
            stats.accepted += 1;
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y5);
            k.swap(0, 6);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Ode(format!("step size underflow at t = {t}")));
        }
    }
    Ok(stats)
}
