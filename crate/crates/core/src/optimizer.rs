//! Minimum-duration constant-amplitude controls whose transfer infidelity is
//! flat in the amplitude deviation α up to a requested order.
//!
//! The amplitude `c₁(α)` left in the initial state is expanded as
//! `Σⱼ αʲ c₁,ⱼ` by propagating the α-derivatives of the state alongside the
//! state itself (`iψⱼ′ = H₀ψⱼ + Vψⱼ₋₁`, `V = ½Ωσₓ`). Since
//! `1 − P = |c₁(α)|²`, the derivatives `k = 1..order` of the infidelity vanish
//! (with `order` odd) exactly when `c₁,₀ … c₁,(order−1)/2` vanish, which is
//! the system solved here. Duration is minimised by bisection on `T·Ω` with a
//! multi-start feasibility solve at each trial duration.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ContinuousControl, ControlMeta, SineSeries, Waveform};
use crate::error::{Error, Result};
use crate::ode::integrate_fixed;
use crate::propagate::{propagate_effective, QubitState};
use crate::specfun::{complete_k, EllipticModulus};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Taylor coefficients `c₁,ⱼ`, `j < terms`, of the amplitude remaining in
/// `|1⟩` after `[0, duration]`, under `Ω → Ω(1 + α)`.
pub fn amplitude_series(
    rabi: impl Fn(f64) -> f64,
    detuning: impl Fn(f64) -> f64,
    duration: f64,
    terms: usize,
    steps: usize,
) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); 2 * terms];
    y[0] = Complex64::new(1.0, 0.0);
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let (omega, delta) = (rabi(t), detuning(t));
        for j in 0..terms {
            let (a, b) = (y[2 * j], y[2 * j + 1]);
            let mut d1 = -delta * a + omega * b;
            let mut d2 = omega * a + delta * b;
            if j > 0 {
                d1 += omega * y[2 * j - 1];
                d2 += omega * y[2 * j - 2];
            }
            dy[2 * j] = -I * 0.5 * d1;
            dy[2 * j + 1] = -I * 0.5 * d2;
        }
    };
    integrate_fixed(rhs, 0.0, duration, steps, &mut y);
    (0..terms).map(|j| y[2 * j]).collect()
}

/// `dᵏ(1 − P)/dαᵏ` at α = 0 for `k = 1..=order`, from amplitude coefficients.
pub fn infidelity_derivatives(series: &[Complex64], order: usize) -> Vec<f64> {
    let coefficient = |k: usize| -> f64 {
        (0..=k)
            .filter(|&i| i < series.len() && k - i < series.len())
            .map(|i| (series[i] * series[k - i].conj()).re)
            .sum()
    };
    let mut factorial = 1.0;
    (1..=order)
        .map(|k| {
            factorial *= k as f64;
            factorial * coefficient(k)
        })
        .collect()
}

fn steps_for(duration: f64, rabi: f64, scale: f64) -> usize {
    // ~400 steps per unit of Ω·T/π keeps the fifth-order fixed-step error
    // well below 1e-12 for detunings of a few Ω.
    ((duration * rabi.max(scale) / PI * 400.0).ceil() as usize).max(200)
}

/// Exact infidelity derivatives `k = 1..=order` at α = 0 and the α = 0
/// infidelity, for a control started in `|1⟩`.
pub fn constraint_residuals(control: &ContinuousControl, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    // Coefficient k of |c₁(α)|² involves c₁,₀ … c₁,ₖ.
    let terms = order + 1;
    let detuning_scale = (0..=64)
        .map(|k| control.detuning(control.duration() * k as f64 / 64.0).abs())
        .fold(0.0, f64::max);
    let steps = steps_for(control.duration(), control.rabi_amplitude(), detuning_scale);
    let run = |steps| amplitude_series(|t| control.rabi(t), |t| control.detuning(t), control.duration(), terms, steps);
    let (coarse, fine) = (run(steps), run(2 * steps));
    let drift = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if drift > 1e-8 {
        return Err(Error::Numerical(format!("series propagation not converged (step-halving drift {drift:.2e})")));
    }
    Ok(infidelity_derivatives(&fine, order))
}

/// Transfer infidelity `1 − P` at α = 0, by propagating the effective model.
pub fn transfer_infidelity(control: &ContinuousControl) -> Result<f64> {
    Ok(1.0 - propagate_effective(control, QubitState::ground(), 1e-12)?.final_transfer())
}

/// Central finite-difference estimates of `dᵏ(1 − P)/dαᵏ` at α = 0 for
/// `k = 1..=order` (order ≤ 6), with one Richardson step between `h` and
/// `h/2`. Entries whose Richardson correction exceeds the estimate itself
/// are flagged as noise-limited.
pub fn finite_difference_residuals(
    control: &ContinuousControl,
    order: usize,
    step: f64,
    tolerance: f64,
) -> Result<Vec<FiniteDifference>> {
    if !(1..=6).contains(&order) {
        return Err(Error::InvalidInput(format!("finite differences support orders 1..=6, got {order}")));
    }
    // Stencils on x = −3h..3h for derivatives 1..6, second-order accurate.
    const STENCILS: [[f64; 7]; 6] = [
        [0.0, 0.0, -0.5, 0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0],
        [0.0, -0.5, 1.0, 0.0, -1.0, 0.5, 0.0],
        [0.0, 1.0, -4.0, 6.0, -4.0, 1.0, 0.0],
        [-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5],
        [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0],
    ];
    let infidelity = |alpha: f64| -> Result<f64> {
        let scaled = control.with_amplitude_scale(1.0 + alpha);
        Ok(1.0 - propagate_effective(&scaled, QubitState::ground(), tolerance)?.final_transfer())
    };
    let sample = |h: f64| -> Result<Vec<f64>> { (-3..=3).map(|j| infidelity(j as f64 * h)).collect() };
    let (wide, narrow) = (sample(step)?, sample(0.5 * step)?);
    Ok((1..=order)
        .map(|k| {
            let apply = |values: &[f64], h: f64| {
                STENCILS[k - 1].iter().zip(values).map(|(c, v)| c * v).sum::<f64>() / h.powi(k as i32)
            };
            let (coarse, fine) = (apply(&wide, step), apply(&narrow, 0.5 * step));
            let value = fine + (fine - coarse) / 3.0;
            let correction = (fine - coarse).abs() / 3.0;
            FiniteDifference { value, correction, noise_limited: correction > value.abs() && correction > 1e-12 }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub value: f64,
    pub correction: f64,
    pub noise_limited: bool,
}

/// Detuning parametrisation `Δ(t)/Ω = Σⱼ cⱼ bⱼ(t/T)` with sine harmonics that
/// vanish at both ends of the pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningAnsatz {
    pub coefficients: Vec<f64>,
    /// Restrict to harmonics odd about mid-pulse.
    pub antisymmetric: bool,
    /// Bound on `|Δ|/Ω`, enforced through `Σ|cⱼ|`.
    pub cap: f64,
}

impl Default for DetuningAnsatz {
    fn default() -> Self {
        Self::new(8)
    }
}

impl DetuningAnsatz {
    pub fn new(size: usize) -> Self {
        Self { coefficients: vec![0.0; size], antisymmetric: true, cap: 5.0 }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn series(&self, duration: f64, rabi_amplitude: f64) -> SineSeries {
        SineSeries {
            duration,
            scale: rabi_amplitude,
            coefficients: self.coefficients.clone(),
            antisymmetric: self.antisymmetric,
        }
    }

    pub fn control(&self, area_multiple: f64, rabi_amplitude: f64) -> Result<ContinuousControl> {
        let duration = area_multiple * PI / rabi_amplitude;
        ContinuousControl::new(
            duration,
            rabi_amplitude,
            Waveform::Constant(rabi_amplitude),
            Waveform::Sine(self.series(duration, rabi_amplitude)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConstraints {
    /// 3 or 5.
    pub order: u32,
    /// Bound on each `|dᵏ(1−P)/dαᵏ|`, `k = 1..=order`.
    pub derivative_tolerance: f64,
    /// Bound on `1 − P` at α = 0.
    pub transfer_tolerance: f64,
}

impl RobustnessConstraints {
    pub fn new(order: u32) -> Result<Self> {
        if order != 3 && order != 5 {
            return Err(Error::InvalidInput(format!("robustness order must be 3 or 5, got {order}")));
        }
        Ok(Self { order, derivative_tolerance: 1e-4, transfer_tolerance: 1e-8 })
    }

    pub fn accepts(&self, residuals: &[f64], infidelity: f64) -> bool {
        residuals.len() >= self.order as usize
            && residuals[..self.order as usize].iter().all(|r| r.abs() <= self.derivative_tolerance)
            && infidelity <= self.transfer_tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_iterations: usize,
    /// Feasibility threshold on the largest amplitude coefficient.
    pub feasibility: f64,
    /// Bisection stops once the bracket on `T·Ω/π` is narrower than this.
    pub area_resolution: f64,
    pub area_bracket: (f64, f64),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iterations: 150,
            feasibility: 1e-9,
            area_resolution: 2e-3,
            area_bracket: (1.0, 4.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub order: u32,
    #[serde(rename = "T_times_omega_over_pi")]
    pub t_times_omega_over_pi: f64,
    pub residuals: Vec<f64>,
    pub transfer_infidelity: f64,
    pub seeds_tried: usize,
    pub wall_time: f64,
    pub coefficients: Vec<f64>,
    pub accepted: bool,
}

/// Residual vector of the feasibility problem: real and imaginary parts of
/// the first `terms` amplitude coefficients plus a cap penalty.
fn feasibility_residuals(coefficients: &[f64], antisymmetric: bool, cap: f64, area: f64, terms: usize) -> Vec<f64> {
    let duration = area * PI;
    let series = SineSeries { duration, scale: 1.0, coefficients: coefficients.to_vec(), antisymmetric };
    // Coarser than `steps_for`; the accepted point is re-checked at full resolution.
    let steps = ((area * SEARCH_STEPS_PER_PI).ceil() as usize).max(100);
    let amp = amplitude_series(|_| 1.0, |t| series.eval(t), duration, terms, steps);
    let mut r: Vec<f64> = amp.iter().flat_map(|c| [c.re, c.im]).collect();
    let excess = coefficients.iter().map(|c| c.abs()).sum::<f64>() - cap;
    r.push(if excess > 0.0 { excess } else { 0.0 });
    r
}

const SEARCH_STEPS_PER_PI: f64 = 150.0;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg–Marquardt on `r(x)` with a forward-difference Jacobian.
/// Returns the best point and its residual sup-norm.
pub(crate) fn levenberg_marquardt(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    start: Vec<f64>,
    max_iterations: usize,
    target: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut x = start;
    let mut r = residual(&x);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut stalled = 0;
    for _ in 0..max_iterations {
        if sup_norm(&r) <= target {
            break;
        }
        let jac: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let h = 1e-7 * x[j].abs().max(1.0);
                let mut xp = x.clone();
                xp[j] += h;
                residual(&xp).iter().zip(&r).map(|(a, b)| (a - b) / h).collect()
            })
            .collect();
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                jtj[i][k] = jac[i].iter().zip(&jac[k]).map(|(a, b)| a * b).sum();
            }
            jtr[i] = -jac[i].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * (jtj[i][i] + 1e-9);
            }
            let Some(step) = solve_dense(damped, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let tr = residual(&trial);
            let tc: f64 = tr.iter().map(|v| v * v).sum();
            if tc.is_finite() && tc < cost {
                if tc > cost * (1.0 - 1e-6) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = trial;
                r = tr;
                cost = tc;
                lambda = (lambda / 5.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 8.0;
        }
        if !improved || stalled >= 5 {
            break;
        }
    }
    let norm = sup_norm(&r);
    (x, norm)
}

struct Feasible {
    coefficients: Vec<f64>,
    norm: f64,
}

fn solve_at_area(
    area: f64,
    ansatz: &DetuningAnsatz,
    terms: usize,
    config: &OptimizerConfig,
    seed: u64,
    warm: Option<&[f64]>,
    tried: &mut usize,
) -> Feasible {
    let residual = |c: &[f64]| feasibility_residuals(c, ansatz.antisymmetric, ansatz.cap, area, terms);
    let mut starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(s as u64));
            (0..ansatz.len()).map(|j| rng.gen_range(-1.5..1.5) / (1.0 + j as f64)).collect()
        })
        .collect();
    if ansatz.coefficients.iter().any(|c| *c != 0.0) {
        starts.push(ansatz.coefficients.clone());
    }
    if let Some(w) = warm {
        starts.insert(0, w.to_vec());
    }
    let mut best = Feasible { coefficients: Vec::new(), norm: f64::INFINITY };
    for x0 in starts {
        let (coefficients, norm) = levenberg_marquardt(&residual, x0, config.max_iterations, config.feasibility);
        *tried += 1;
        if norm < best.norm {
            best = Feasible { coefficients, norm };
        }
        if best.norm <= config.feasibility {
            break;
        }
    }
    best
}

/// Searches the minimum `T·Ω` at which a detuning in `ansatz` meets the
/// robustness `order`, and returns that control (scaled to `rabi_amplitude`)
/// with its report.
pub fn optimize(
    order: u32,
    rabi_amplitude: f64,
    ansatz: &DetuningAnsatz,
    seed: u64,
) -> Result<(ContinuousControl, OptimizationReport)> {
    optimize_with(order, rabi_amplitude, ansatz, seed, &OptimizerConfig::default())
}

pub fn optimize_with(
    order: u32,
    rabi_amplitude: f64,
    ansatz: &DetuningAnsatz,
    seed: u64,
    config: &OptimizerConfig,
) -> Result<(ContinuousControl, OptimizationReport)> {
    let constraints = RobustnessConstraints::new(order)?;
    if !(rabi_amplitude.is_finite() && rabi_amplitude > 0.0) {
        return Err(Error::InvalidInput(format!("Rabi amplitude must be positive, got {rabi_amplitude}")));
    }
    let terms = (order as usize).div_ceil(2);
    if ansatz.len() < order as usize {
        return Err(Error::InvalidInput(format!(
            "ansatz has {} coefficients, order {order} needs at least {order}",
            ansatz.len()
        )));
    }
    let clock = Instant::now();
    let mut seeds_tried = 0;
    let (mut lo, mut hi) = config.area_bracket;

    let mut best: Option<(f64, Vec<f64>)>;
    let probe = |area: f64, warm: Option<Vec<f64>>, seeds_tried: &mut usize| {
        solve_at_area(area, ansatz, terms, config, seed, warm.as_deref(), seeds_tried)
    };

    // Grow the upper end until it is feasible.
    loop {
        let f = probe(hi, None, &mut seeds_tried);
        if f.norm <= config.feasibility {
            best = Some((hi, f.coefficients));
            break;
        }
        lo = hi;
        hi += 1.0;
        if hi > 12.0 {
            return Err(Error::Infeasible(format!("no feasible duration up to T·Ω = 12π (best residual {:.2e})", f.norm)));
        }
    }
    while hi - lo > config.area_resolution {
        let mid = 0.5 * (lo + hi);
        let warm = best.as_ref().map(|(_, c)| c.clone());
        let f = probe(mid, warm, &mut seeds_tried);
        log::debug!("order {order}: T·Ω/π = {mid:.5} residual {:.3e}", f.norm);
        if f.norm <= config.feasibility {
            hi = mid;
            best = Some((mid, f.coefficients));
        } else {
            lo = mid;
        }
    }
    let (area, coefficients) = best.expect("upper bracket is feasible");

    let solution = DetuningAnsatz { coefficients, ..ansatz.clone() };
    let control = solution
        .control(area, rabi_amplitude)?
        .with_meta(ControlMeta { order: Some(order), source: "optimizer".into() });
    let residuals = constraint_residuals(&control, order as usize)?;
    let infidelity = transfer_infidelity(&control)?.max(0.0);
    let report = OptimizationReport {
        order,
        t_times_omega_over_pi: area,
        accepted: constraints.accepts(&residuals, infidelity),
        residuals,
        transfer_infidelity: infidelity,
        seeds_tried,
        wall_time: clock.elapsed().as_secs_f64(),
        coefficients: solution.coefficients,
    };
    Ok((control, report))
}


/// Least-squares solution of the order-`order` amplitude conditions at a
/// fixed `T·Ω/π`, started from `ansatz` and from seeded random points.
/// Returns the refined ansatz and the largest remaining amplitude coefficient,
/// which is zero only at or above the minimum feasible duration.
pub fn refine_at_area(
    order: u32,
    area_multiple: f64,
    ansatz: &DetuningAnsatz,
    seed: u64,
    config: &OptimizerConfig,
) -> Result<(DetuningAnsatz, f64)> {
    RobustnessConstraints::new(order)?;
    if !(area_multiple.is_finite() && area_multiple > 0.0) {
        return Err(Error::InvalidInput(format!("area multiple must be positive, got {area_multiple}")));
    }
    let mut tried = 0;
    let warm = ansatz.coefficients.iter().any(|c| *c != 0.0).then_some(ansatz.coefficients.as_slice());
    let f = solve_at_area(area_multiple, ansatz, (order as usize).div_ceil(2), config, seed, warm, &mut tried);
    Ok((DetuningAnsatz { coefficients: f.coefficients, ..ansatz.clone() }, f.norm))
}

/// Member of the family `Δ₀ cn(ωt + K(m), m)` with `ωT = 4K(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticFit {
    pub m: f64,
    pub omega_over_rabi: f64,
    pub delta0_over_rabi: f64,
    pub area_multiple: f64,
}

const ELLIPTIC_STEPS: usize = 4000;

/// `(c₁,₀, c₁,₁)`; both are real because the detuning is odd about mid-pulse.
fn elliptic_residuals(m: EllipticModulus, delta0: f64, area: f64) -> Vec<f64> {
    let k = complete_k(m);
    let duration = area * PI;
    let detuning = Waveform::Elliptic { amplitude: delta0, rate: 4.0 * k / duration, shift: k, modulus: m };
    let amp = amplitude_series(|_| 1.0, |t| detuning.eval(t), duration, 2, ELLIPTIC_STEPS);
    vec![amp[0].re, amp[1].re]
}

/// Shortest third-order member of the full-period elliptic family.
///
/// For each `m` the two real conditions fix `(Δ₀, T)`; the outer
/// golden-section search minimises `T` over `m ∈ [0.02, 0.9]`.
pub fn optimize_elliptic(seed: u64, config: &OptimizerConfig) -> Result<EllipticFit> {
    let solve = |m: f64, warm: Option<[f64; 2]>| -> Result<[f64; 2]> {
        let modulus = EllipticModulus::new(m)?;
        let residual = |p: &[f64]| {
            if p[1] <= 0.0 {
                return vec![1.0, 1.0];
            }
            elliptic_residuals(modulus, p[0], p[1])
        };
        let mut starts: Vec<[f64; 2]> = (0..config.starts)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(s as u64));
                [rng.gen_range(0.5..2.0), rng.gen_range(config.area_bracket.0..config.area_bracket.1)]
            })
            .collect();
        if let Some(w) = warm {
            starts.insert(0, w);
        }
        let mut best: Option<[f64; 2]> = None;
        for x0 in starts {
            let (p, norm) = levenberg_marquardt(&residual, x0.to_vec(), config.max_iterations, 1e-13);
            if norm <= config.feasibility && p[1] > 0.0 && best.is_none_or(|b| p[1] < b[1]) {
                best = Some([p[0], p[1]]);
                if warm.is_some() {
                    break;
                }
            }
        }
        best.ok_or_else(|| Error::Infeasible(format!("no third-order elliptic control found at m = {m}")))
    };

    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.02, 0.9);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = solve(c, None)?;
    let mut fd = solve(d, Some(fc))?;
    while b - a > 1e-3 {
        if fc[1] < fd[1] {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = solve(c, Some(fd))?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = solve(d, Some(fc))?;
        }
    }
    let (m, p) = if fc[1] < fd[1] { (c, fc) } else { (d, fd) };
    let k = complete_k(EllipticModulus::new(m)?);
    Ok(EllipticFit { m, omega_over_rabi: 4.0 * k / (p[1] * PI), delta0_over_rabi: p[0], area_multiple: p[1] })
}
