//! Dormand–Prince 5(4) embedded Runge–Kutta integrator with adaptive steps.
//!
//! Steps that would leave the nonnegative orthant are rejected and retried
//! with a smaller step when [`OdeOptions::nonnegative`] is set; states are
//! never clipped.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stop once the field is negligible for several accepted steps in a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumStop {
    /// ‖field‖∞ < tol · max(1, ‖x‖∞).
    pub tol: f64,
    pub consecutive: usize,
}

impl Default for EquilibriumStop {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            consecutive: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    /// Absolute lower bound on the step size.
    pub min_step: f64,
    pub max_steps: usize,
    pub nonnegative: bool,
    pub stop_at_equilibrium: Option<EquilibriumStop>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            initial_step: None,
            max_step: f64::INFINITY,
            min_step: 1e-14,
            max_steps: 50_000_000,
            nonnegative: true,
            stop_at_equilibrium: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: Vec<f64>,
    /// Normalized local error estimate of the last accepted step.
    pub error_estimate: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub reached_equilibrium: bool,
}

/// Integrates y' = f(t, y) from t = 0 to `t_end`. `observer` sees the
/// initial state and every accepted step.
pub fn integrate<F, O>(
    mut f: F,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    f(t, &y, &mut k[0]);
    observer(t, &y);

    let mut out = OdeOutcome {
        t,
        y: y.clone(),
        error_estimate: 0.0,
        accepted: 0,
        rejected: 0,
        reached_equilibrium: false,
    };
    if let Some(stop) = opts.stop_at_equilibrium {
        if is_still(&k[0], &y, stop.tol) && stop.consecutive == 0 {
            out.reached_equilibrium = true;
            return Ok(out);
        }
    }
    if t_end <= 0.0 {
        return Ok(out);
    }

    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(&y, &k[0], opts))
        .min(opts.max_step)
        .min(t_end);
    let mut still = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if out.accepted + out.rejected >= opts.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: opts.max_steps,
                horizon: t_end,
            });
        }
        if h < opts.min_step {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(s);
            let _ = done;
            f(t + C[s] * h, &stage, &mut rest[0]);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL).
        y_new.copy_from_slice(&stage);

        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };

        let positive_ok = !opts.nonnegative || y_new.iter().all(|&v| v >= 0.0);
        if !err.is_finite() || !positive_ok {
            out.rejected += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            out.accepted += 1;
            out.error_estimate = err;
            observer(t, &y);

            if let Some(stop) = opts.stop_at_equilibrium {
                if is_still(&k[0], &y, stop.tol) {
                    still += 1;
                    if still >= stop.consecutive {
                        out.reached_equilibrium = true;
                        break;
                    }
                } else {
                    still = 0;
                }
            }

            let mut factor = if err == 0.0 {
                5.0
            } else {
                0.9 * err.powf(-0.2)
            };
            factor = factor.clamp(0.2, 5.0);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(opts.max_step);
            last_rejected = false;
        } else {
            out.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            last_rejected = true;
        }
    }

    out.t = t;
    out.y = y;
    Ok(out)
}

fn is_still(field: &[f64], y: &[f64], tol: f64) -> bool {
    let fmax = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    fmax < tol * ymax.max(1.0)
}

fn initial_step(y: &[f64], f0: &[f64], opts: &OdeOptions) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = opts.atol + opts.rtol * yi.abs();
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max(fi.abs() / sc);
    }
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).max(1e-10)
    }
}
