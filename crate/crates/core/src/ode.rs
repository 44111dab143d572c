//! Dormand–Prince 5(4) integration of complex linear systems.
//!
//! The adaptive driver lands exactly on caller-supplied stop times so that
//! populations can be reported at pulse boundaries without dense output.
//! The fixed-step driver uses the same fifth-order weights and is smooth in
//! the parameters of the right-hand side, which the optimizer relies on.

use num_complex::Complex64;

use crate::error::{Error, Result};

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

// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Options for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Used as both the absolute and relative per-step error target.
    pub tolerance: f64,
    /// Upper bound on the step; keeps the driver from stepping over narrow
    /// features of the right-hand side.
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl AdaptiveOptions {
    pub fn new(tolerance: f64, max_step: f64) -> Self {
        Self { tolerance, max_step, min_step: 1e-14, max_steps: 5_000_000 }
    }
}

/// Scratch space for one Dormand–Prince step.
struct Stages {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
}

impl Stages {
    fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    /// Fills stages 1..7 given `k[0] = f(t, y)`; writes the fifth-order
    /// solution into `out` and returns the scaled error estimate.
    fn step<F>(&mut self, f: &mut F, t: f64, y: &[Complex64], h: f64, out: &mut [Complex64], tol: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        for s in 1..7 {
            for i in 0..y.len() {
                let mut acc = y[i];
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += self.k[j][i] * (h * a);
                    }
                }
                self.tmp[i] = acc;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &self.tmp, &mut tail[0]);
        }
        // Stage 7 was evaluated at the fifth-order solution (FSAL).
        out.copy_from_slice(&self.tmp);
        let mut err = 0.0_f64;
        for i in 0..y.len() {
            let mut e = Complex64::new(0.0, 0.0);
            for (s, w) in E.iter().enumerate() {
                if *w != 0.0 {
                    e += self.k[s][i] * (h * w);
                }
            }
            let scale = tol + tol * y[i].norm().max(out[i].norm());
            err = err.max(e.norm() / scale);
        }
        err
    }
}

/// Integrates `y' = f(t, y)` from `t0`, returning the state at each entry of
/// `stops` (which must be sorted and ≥ `t0`).
pub fn integrate_adaptive<F>(
    mut f: F,
    t0: f64,
    y0: &[Complex64],
    stops: &[f64],
    opts: AdaptiveOptions,
) -> Result<Vec<Vec<Complex64>>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let dim = y0.len();
    let mut stages = Stages::new(dim);
    let mut y = y0.to_vec();
    let mut y_new = y.clone();
    let mut t = t0;
    let mut h = opts.max_step.min(1e-2 * stops.last().map_or(1.0, |&e| (e - t0).abs().max(1e-12)));
    let mut out = Vec::with_capacity(stops.len());
    let mut steps = 0usize;

    f(t, &y, &mut stages.k[0]);
    for &stop in stops {
        if stop < t - 1e-12 * stop.abs().max(1.0) {
            return Err(Error::InvalidInput(format!("stop time {stop} precedes current time {t}")));
        }
        while t < stop {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Numerical(format!("step budget exhausted at t = {t}")));
            }
            let remaining = stop - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let err = stages.step(&mut f, t, &y, step, &mut y_new, opts.tolerance);
            if err <= 1.0 || step <= opts.min_step {
                if step <= opts.min_step && err > 1.0 {
                    return Err(Error::StepUnderflow { time: t });
                }
                t = if last { stop } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = stages.k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = (step * grow).min(opts.max_step);
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.2);
                if h < opts.min_step {
                    return Err(Error::StepUnderflow { time: t });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Fixed-step fifth-order integration over `[t0, t1]`.
pub fn integrate_fixed<F>(mut f: F, t0: f64, t1: f64, steps: usize, y: &mut [Complex64])
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let dim = y.len();
    let mut stages = Stages::new(dim);
    let mut y_new = y.to_vec();
    let h = (t1 - t0) / steps as f64;
    let mut t = t0;
    f(t, y, &mut stages.k[0]);
    for n in 0..steps {
        stages.step(&mut f, t, y, h, &mut y_new, 1.0);
        y.copy_from_slice(&y_new);
        t = t0 + (n + 1) as f64 * h;
        let (first, rest) = stages.k.split_at_mut(6);
        first[0].copy_from_slice(&rest[0]);
    }
}
