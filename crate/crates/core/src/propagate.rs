//! Two-level dynamics of a subpulse train at three levels of description:
//! instantaneous SU(2) kicks, the full Gaussian-envelope Schrödinger
//! equation, and the Dirac-comb mode expansion truncated at `|k| ≤ k_max`
//! (whose `k = 0` term is the effective continuous Hamiltonian).
//!
//! States are written in the bare basis `(|1⟩, |2⟩)`; only populations and
//! relative phases carry meaning, global phases are never compared.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::ContinuousControl;
use crate::digitize::{effective_control, SubpulseTrain};
use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, AdaptiveOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const MIN_TOLERANCE: f64 = 1e-12;
pub const MAX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl QubitState {
    pub fn new(c1: Complex64, c2: Complex64) -> Self {
        Self { c1, c2 }
    }

    /// `|1⟩`, the initial state of every transfer.
    pub fn ground() -> Self {
        Self { c1: ONE, c2: ZERO }
    }

    pub fn excited() -> Self {
        Self { c1: ZERO, c2: ONE }
    }

    pub fn norm(&self) -> f64 {
        (self.c1.norm_sqr() + self.c2.norm_sqr()).sqrt()
    }

    pub fn populations(&self) -> (f64, f64) {
        (self.c1.norm_sqr(), self.c2.norm_sqr())
    }

    fn from_slice(y: &[Complex64]) -> Self {
        Self { c1: y[0], c2: y[1] }
    }
}

/// 2×2 unitary with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Propagator(pub [[Complex64; 2]; 2]);

impl Su2Propagator {
    pub fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn determinant(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Largest entry of `|U†U − 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn apply(&self, s: &QubitState) -> QubitState {
        let m = &self.0;
        QubitState { c1: m[0][0] * s.c1 + m[0][1] * s.c2, c2: m[1][0] * s.c1 + m[1][1] * s.c2 }
    }

    /// `diag(e^{iθ/2}, e^{−iθ/2})`.
    pub fn z_phase(theta: f64) -> Self {
        let h = Complex64::from_polar(1.0, 0.5 * theta);
        Self([[h, ZERO], [ZERO, h.conj()]])
    }
}

impl Mul for Su2Propagator {
    type Output = Su2Propagator;

    fn mul(self, rhs: Su2Propagator) -> Su2Propagator {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Su2Propagator(out)
    }
}

/// Propagator of a resonant pulse of area `area` and phase `phase`:
/// `[[cos A/2, −i e^{−iφ} sin A/2], [−i e^{iφ} sin A/2, cos A/2]]`.
pub fn delta_kick(area: f64, phase: f64) -> Su2Propagator {
    let (s, c) = (0.5 * area).sin_cos();
    let off = -I * s;
    Su2Propagator([
        [Complex64::new(c, 0.0), off * Complex64::from_polar(1.0, -phase)],
        [off * Complex64::from_polar(1.0, phase), Complex64::new(c, 0.0)],
    ])
}

/// Which description produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelTag {
    Delta,
    Full,
    Effective,
    Modes(u32),
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelTag::Delta => f.write_str("delta"),
            ModelTag::Full => f.write_str("full"),
            ModelTag::Effective => f.write_str("effective"),
            ModelTag::Modes(k) => write!(f, "modes:{k}"),
        }
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(ModelTag::Delta),
            "full" => Ok(ModelTag::Full),
            "effective" => Ok(ModelTag::Effective),
            _ => s
                .strip_prefix("modes:")
                .and_then(|k| k.parse().ok())
                .map(ModelTag::Modes)
                .ok_or_else(|| Error::InvalidInput(format!("unknown model tag {s:?}"))),
        }
    }
}

impl From<ModelTag> for String {
    fn from(m: ModelTag) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ModelTag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: QubitState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelTag,
    pub points: Vec<TrajectoryPoint>,
    /// Largest `| ‖ψ‖ − 1 |` seen along the trajectory.
    pub max_norm_deviation: f64,
}

impl Trajectory {
    fn new(model: ModelTag, points: Vec<TrajectoryPoint>) -> Self {
        let max_norm_deviation = points.iter().map(|p| (p.state.norm() - 1.0).abs()).fold(0.0, f64::max);
        Self { model, points, max_norm_deviation }
    }

    pub fn final_state(&self) -> QubitState {
        self.points.last().expect("trajectories are never empty").state
    }

    /// Population of `|2⟩` at the end.
    pub fn final_transfer(&self) -> f64 {
        self.final_state().c2.norm_sqr()
    }

    /// CSV with columns `time_ns,pop_1,pop_2,re_c1,im_c1,re_c2,im_c2,model_tag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_ns", "pop_1", "pop_2", "re_c1", "im_c1", "re_c2", "im_c2", "model_tag"])?;
        let tag = self.model.to_string();
        for p in &self.points {
            let (p1, p2) = p.state.populations();
            w.write_record([
                p.time.to_string(),
                p1.to_string(),
                p2.to_string(),
                p.state.c1.re.to_string(),
                p.state.c1.im.to_string(),
                p.state.c2.re.to_string(),
                p.state.c2.im.to_string(),
                tag.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if (MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tolerance) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "tolerance must lie in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}], got {tolerance:e}"
        )))
    }
}

fn norm_budget(tolerance: f64) -> f64 {
    (1e3 * tolerance).max(1e-10)
}

fn warn_on_norm_drift(traj: &Trajectory, tolerance: f64) {
    if traj.max_norm_deviation > norm_budget(tolerance) {
        log::warn!(
            "{} model: norm drifted by {:.3e} (tolerance {:.1e})",
            traj.model,
            traj.max_norm_deviation,
            tolerance
        );
    }
}

/// Ordered product of all kicks of `train` (last pulse leftmost).
pub fn train_propagator(train: &SubpulseTrain) -> Su2Propagator {
    train
        .pulses()
        .iter()
        .enumerate()
        .fold(Su2Propagator::identity(), |u, (n, p)| delta_kick(train.pulse_area(n), p.phase) * u)
}

/// Applies the kicks in order; records the state at the train start and at
/// the end of each pulse interval.
pub fn propagate_delta_train(train: &SubpulseTrain, initial: QubitState) -> Trajectory {
    let tau = train.tau();
    let mut state = initial;
    let mut points = Vec::with_capacity(train.len() + 1);
    points.push(TrajectoryPoint { time: train.start(), state });
    for (n, p) in train.pulses().iter().enumerate() {
        state = delta_kick(train.pulse_area(n), p.phase).apply(&state);
        points.push(TrajectoryPoint { time: p.center + 0.5 * tau, state });
    }
    Trajectory::new(ModelTag::Delta, points)
}

/// The kick model in the frame that absorbs the phases: real coupling kicks
/// `Aₙ` interleaved with diagonal kicks `diag(e^{iΔφₙ/2}, e^{−iΔφₙ/2})` at the
/// interval boundaries. Populations agree with [`propagate_delta_train`].
pub fn propagate_delta_train_phase_frame(train: &SubpulseTrain, initial: QubitState) -> Trajectory {
    let tau = train.tau();
    let Some(first) = train.pulses().first() else {
        return Trajectory::new(ModelTag::Delta, vec![TrajectoryPoint { time: 0.0, state: initial }]);
    };
    // φ(tᵢ) = T†(tᵢ) Φ(tᵢ) with T = diag(e^{−iφ₀/2}, e^{iφ₀/2}).
    let mut state = Su2Propagator::z_phase(first.phase).apply(&initial);
    let mut points = vec![TrajectoryPoint { time: train.start(), state }];
    let mut previous = first.phase;
    for (n, p) in train.pulses().iter().enumerate() {
        if n > 0 {
            state = Su2Propagator::z_phase(p.phase - previous).apply(&state);
            previous = p.phase;
        }
        state = delta_kick(train.pulse_area(n), 0.0).apply(&state);
        points.push(TrajectoryPoint { time: p.center + 0.5 * tau, state });
    }
    Trajectory::new(ModelTag::Delta, points)
}

/// Integrates the Schrödinger equation with the actual subpulse envelopes
/// `H(t) = ½ Σₙ Ωₙ Λ((t − tₙ)/σ) [[0, e^{−iφₙ}], [e^{iφₙ}, 0]]`.
///
/// The window is widened beyond the train so that the outer tails are
/// integrated; states are reported at the inner interval boundaries.
pub fn propagate_full(train: &SubpulseTrain, initial: QubitState, tolerance: f64) -> Result<Trajectory> {
    check_tolerance(tolerance)?;
    if train.is_empty() {
        return Ok(Trajectory::new(ModelTag::Full, vec![TrajectoryPoint { time: 0.0, state: initial }]));
    }
    let tau = train.tau();
    let margin = (train.shape().support() * train.sigma()).max(0.5 * tau);
    let first = train.pulses()[0].center;
    let last = train.pulses()[train.len() - 1].center;
    let t0 = first - margin;
    let mut stops: Vec<f64> = train.pulses()[..train.len() - 1].iter().map(|p| p.center + 0.5 * tau).collect();
    stops.push(last + margin);

    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let c = train.coupling(t);
        // −i H ψ with H₁₂ = ½Ω e^{−iφ}, H₂₁ = ½Ω e^{iφ}.
        dy[0] = -I * 0.5 * c.conj() * y[1];
        dy[1] = -I * 0.5 * c * y[0];
    };
    let opts = AdaptiveOptions::new(tolerance, 0.25 * train.sigma());
    let states = integrate_adaptive(rhs, t0, &[initial.c1, initial.c2], &stops, opts)?;

    let mut points = vec![TrajectoryPoint { time: t0, state: initial }];
    points.extend(stops.iter().zip(states).map(|(&time, y)| TrajectoryPoint { time, state: QubitState::from_slice(&y) }));
    let traj = Trajectory::new(ModelTag::Full, points);
    warn_on_norm_drift(&traj, tolerance);
    Ok(traj)
}

const EFFECTIVE_SAMPLES: usize = 256;

/// Integrates `H = ½[[−Δ, Ω], [Ω, Δ]]` over `[0, T]`, reporting 257 equally
/// spaced states.
pub fn propagate_effective(control: &ContinuousControl, initial: QubitState, tolerance: f64) -> Result<Trajectory> {
    let times: Vec<f64> =
        (0..=EFFECTIVE_SAMPLES).map(|k| control.duration() * k as f64 / EFFECTIVE_SAMPLES as f64).collect();
    propagate_effective_at(control, initial, tolerance, &times)
}

/// As [`propagate_effective`] with caller-chosen sorted output times in
/// `[0, T]`; the first output is taken at `times[0]` after starting at 0.
pub fn propagate_effective_at(
    control: &ContinuousControl,
    initial: QubitState,
    tolerance: f64,
    times: &[f64],
) -> Result<Trajectory> {
    check_tolerance(tolerance)?;
    if times.is_empty() {
        return Err(Error::InvalidInput("no output times".into()));
    }
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let (omega, delta) = (control.rabi(t), control.detuning(t));
        dy[0] = -I * 0.5 * (-delta * y[0] + omega * y[1]);
        dy[1] = -I * 0.5 * (omega * y[0] + delta * y[1]);
    };
    let opts = AdaptiveOptions::new(tolerance, control.duration() / 32.0);
    let states = integrate_adaptive(rhs, 0.0, &[initial.c1, initial.c2], times, opts)?;
    let points =
        times.iter().zip(states).map(|(&time, y)| TrajectoryPoint { time, state: QubitState::from_slice(&y) }).collect();
    let traj = Trajectory::new(ModelTag::Effective, points);
    warn_on_norm_drift(&traj, tolerance);
    Ok(traj)
}

/// Retained Dirac-comb harmonics `|k| ≤ k_max` at repetition rate `γ = 2π/τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTruncation {
    pub k_max: u32,
    pub gamma: f64,
}

impl ModeTruncation {
    pub fn for_train(train: &SubpulseTrain, k_max: u32) -> Self {
        Self { k_max, gamma: 2.0 * PI / train.tau() }
    }
}

/// `Σ_{|k|≤K} e^{ikx} = 1 + 2 Σ_{k=1}^{K} cos(kx)`.
fn dirichlet(k_max: u32, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let (mut cos_k, mut sin_k) = (1.0, 0.0);
    let mut acc = 1.0;
    for _ in 0..k_max {
        let next = cos_k * c - sin_k * s;
        sin_k = sin_k * c + cos_k * s;
        cos_k = next;
        acc += 2.0 * cos_k;
    }
    acc
}

/// Integrates the comb Hamiltonian, in the frame that absorbs the phases,
/// `H = (1/2τ) Σ_{|k|≤K} [[−(−1)ᵏ Δφ(t), A(t)], [A(t), (−1)ᵏ Δφ(t)]] e^{ikγt}`
/// with `A` and `Δφ` interpolated from the train. Coupling harmonics are
/// phased to peak at the pulse centres, detuning harmonics at the interval
/// boundaries; at `K = 0` this is the effective Hamiltonian of the train.
pub fn propagate_modes(
    train: &SubpulseTrain,
    truncation: ModeTruncation,
    initial: QubitState,
    tolerance: f64,
) -> Result<Trajectory> {
    check_tolerance(tolerance)?;
    let effective = effective_control(train)?;
    let tau = train.tau();
    let duration = effective.duration();
    let ModeTruncation { k_max, gamma } = truncation;

    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let coupling = effective.rabi(t) * dirichlet(k_max, gamma * (t - 0.5 * tau));
        let detuning = effective.detuning(t) * dirichlet(k_max, gamma * t);
        dy[0] = -I * 0.5 * (-detuning * y[0] + coupling * y[1]);
        dy[1] = -I * 0.5 * (coupling * y[0] + detuning * y[1]);
    };
    let max_step = (duration / 32.0).min(tau / (8.0 * (k_max as f64 + 1.0)));
    let samples = (train.len() * 4).max(EFFECTIVE_SAMPLES);
    let times: Vec<f64> = (0..=samples).map(|k| duration * k as f64 / samples as f64).collect();
    let states =
        integrate_adaptive(rhs, 0.0, &[initial.c1, initial.c2], &times, AdaptiveOptions::new(tolerance, max_step))?;
    let start = train.start();
    let points = times
        .iter()
        .zip(states)
        .map(|(&time, y)| TrajectoryPoint { time: time + start, state: QubitState::from_slice(&y) })
        .collect();
    let traj = Trajectory::new(ModelTag::Modes(k_max), points);
    warn_on_norm_drift(&traj, tolerance);
    Ok(traj)
}
