//! Continuous-time control laws in the resonant frame: a Rabi envelope Ω(t),
//! a detuning Δ(t) and the phase φ(t) = φ(0) + ∫₀ᵗ Δ, all on `[0, T]`.
//!
//! Time and angular frequency units are whatever the caller uses
//! consistently; files written by this crate declare nanoseconds and rad/ns.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{Extrapolation, MonotoneCubic};
use crate::specfun::{complete_k, jacobi_cn, EllipticModulus};

/// Shape of a time-dependent scalar (Rabi frequency or detuning).
#[derive(Clone)]
pub enum Waveform {
    Constant(f64),
    /// `amplitude · cn(rate·t + shift, m)`.
    Elliptic { amplitude: f64, rate: f64, shift: f64, modulus: EllipticModulus },
    Sine(SineSeries),
    Sampled(MonotoneCubic),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Waveform::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Waveform::Elliptic { amplitude, rate, shift, modulus } => f
                .debug_struct("Elliptic")
                .field("amplitude", amplitude)
                .field("rate", rate)
                .field("shift", shift)
                .field("modulus", &modulus.value())
                .finish(),
            Waveform::Sine(s) => f.debug_tuple("Sine").field(s).finish(),
            Waveform::Sampled(s) => write!(f, "Sampled({} points)", s.times().len()),
            Waveform::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Waveform {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant(c) => *c,
            Waveform::Elliptic { amplitude, rate, shift, modulus } => {
                // The argument is finite for finite t, so this cannot fail.
                amplitude * jacobi_cn(rate * t + shift, *modulus).unwrap_or(f64::NAN)
            }
            Waveform::Sine(s) => s.eval(t),
            Waveform::Sampled(s) => s.eval(t),
            Waveform::Custom(f) => f(t),
        }
    }

    /// Central-difference derivative.
    pub fn derivative(&self, t: f64, h: f64) -> f64 {
        (self.eval(t + h) - self.eval(t - h)) / (2.0 * h)
    }

    pub fn scaled(&self, factor: f64) -> Waveform {
        match self {
            Waveform::Constant(c) => Waveform::Constant(c * factor),
            Waveform::Elliptic { amplitude, rate, shift, modulus } => Waveform::Elliptic {
                amplitude: amplitude * factor,
                rate: *rate,
                shift: *shift,
                modulus: *modulus,
            },
            Waveform::Sine(s) => Waveform::Sine(SineSeries { scale: s.scale * factor, ..s.clone() }),
            Waveform::Sampled(s) => {
                Waveform::Sampled(s.map_values(|v| v * factor).expect("scaling keeps samples finite"))
            }
            Waveform::Custom(f) => {
                let f = Arc::clone(f);
                Waveform::Custom(Arc::new(move |t| factor * f(t)))
            }
        }
    }
}

/// `scale · Σⱼ cⱼ sin(j·π·t/T)` on `[0, T]`; with `antisymmetric` set only the
/// harmonics `sin(2jπt/T)`, which are odd about mid-pulse, are used.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeries {
    pub duration: f64,
    pub scale: f64,
    pub coefficients: Vec<f64>,
    pub antisymmetric: bool,
}

impl SineSeries {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let base = if self.antisymmetric { 2.0 } else { 1.0 } * PI * t / self.duration;
        // sin(jθ) by the Chebyshev recurrence.
        let (s1, c1) = base.sin_cos();
        let two_c = 2.0 * c1;
        let (mut prev, mut cur) = (0.0, s1);
        let mut acc = 0.0;
        for &c in &self.coefficients {
            acc += c * cur;
            let next = two_c * cur - prev;
            prev = cur;
            cur = next;
        }
        self.scale * acc
    }
}

#[allow(clippy::excessive_precision)]
const GL_NODES: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
#[allow(clippy::excessive_precision)]
const GL_WEIGHTS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

fn gauss_legendre(f: &Waveform, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * (f.eval(mid - half * x) + f.eval(mid + half * x));
    }
    acc * half
}

/// Cumulative integral of the detuning at equally spaced panel edges.
#[derive(Debug, Clone)]
struct PhaseTable {
    panel: f64,
    cumulative: Vec<f64>,
}

const PHASE_RTOL: f64 = 1e-12;
const PHASE_MAX_PANELS: usize = 1 << 16;

impl PhaseTable {
    fn build(detuning: &Waveform, duration: f64) -> Self {
        let table = |panels: usize| {
            let h = duration / panels as f64;
            let mut cum = Vec::with_capacity(panels + 1);
            let mut acc = 0.0;
            cum.push(0.0);
            for k in 0..panels {
                acc += gauss_legendre(detuning, k as f64 * h, (k + 1) as f64 * h);
                cum.push(acc);
            }
            cum
        };
        let mut panels = 32;
        let mut coarse = table(panels);
        loop {
            let fine = table(2 * panels);
            let scale = fine.iter().fold(1e-300_f64, |m, v| m.max(v.abs())).max(1.0);
            let disagreement =
                coarse.iter().enumerate().map(|(k, c)| (fine[2 * k] - c).abs()).fold(0.0, f64::max);
            panels *= 2;
            coarse = fine;
            if disagreement <= PHASE_RTOL * scale || panels >= PHASE_MAX_PANELS {
                break;
            }
        }
        Self { panel: duration / panels as f64, cumulative: coarse }
    }

    fn integral_to(&self, detuning: &Waveform, t: f64) -> f64 {
        let last = self.cumulative.len() - 1;
        let k = ((t / self.panel).floor().max(0.0) as usize).min(last);
        let edge = k as f64 * self.panel;
        if t == edge {
            self.cumulative[k]
        } else {
            self.cumulative[k] + gauss_legendre(detuning, edge, t)
        }
    }
}

/// Provenance recorded alongside a control and written to waveform files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlMeta {
    #[serde(default)]
    pub order: Option<u32>,
    #[serde(default)]
    pub source: String,
}

/// An immutable resonant-frame control on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ContinuousControl {
    duration: f64,
    rabi_amplitude: f64,
    rabi: Waveform,
    detuning: Waveform,
    phase: PhaseTable,
    phase_reference: f64,
    meta: ControlMeta,
}

impl ContinuousControl {
    /// `rabi_amplitude` is the nominal peak Ω used to normalise the envelope.
    pub fn new(duration: f64, rabi_amplitude: f64, rabi: Waveform, detuning: Waveform) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidInput(format!("duration must be positive, got {duration}")));
        }
        if !(rabi_amplitude.is_finite() && rabi_amplitude > 0.0) {
            return Err(Error::InvalidInput(format!("Rabi amplitude must be positive, got {rabi_amplitude}")));
        }
        let phase = PhaseTable::build(&detuning, duration);
        Ok(Self {
            duration,
            rabi_amplitude,
            rabi,
            detuning,
            phase,
            phase_reference: 0.0,
            meta: ControlMeta::default(),
        })
    }

    /// Constant Rabi frequency and constant detuning.
    pub fn constant(rabi: f64, duration: f64, detuning: f64) -> Result<Self> {
        Self::new(duration, rabi, Waveform::Constant(rabi), Waveform::Constant(detuning))
    }

    pub fn with_meta(mut self, meta: ControlMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Sets φ(0).
    pub fn with_phase_reference(mut self, phase0: f64) -> Self {
        self.phase_reference = phase0;
        self
    }

    /// The same control with every Rabi frequency multiplied by `factor`;
    /// detuning and phase are untouched.
    pub fn with_amplitude_scale(&self, factor: f64) -> Self {
        Self { rabi: self.rabi.scaled(factor), ..self.clone() }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn rabi_amplitude(&self) -> f64 {
        self.rabi_amplitude
    }

    pub fn meta(&self) -> &ControlMeta {
        &self.meta
    }

    pub fn rabi_waveform(&self) -> &Waveform {
        &self.rabi
    }

    pub fn detuning_waveform(&self) -> &Waveform {
        &self.detuning
    }

    #[inline]
    pub fn rabi(&self, t: f64) -> f64 {
        self.rabi.eval(t)
    }

    #[inline]
    pub fn detuning(&self, t: f64) -> f64 {
        self.detuning.eval(t)
    }

    pub fn phase(&self, t: f64) -> f64 {
        self.phase_reference + self.phase.integral_to(&self.detuning, t)
    }

    /// Π(s) = Ω(sT)/Ω_peak, clamped into [0, 1].
    pub fn envelope(&self, s: f64) -> f64 {
        (self.rabi(s * self.duration) / self.rabi_amplitude).clamp(0.0, 1.0)
    }

    /// T·Ω/π for the nominal peak amplitude.
    pub fn area_multiple(&self) -> f64 {
        self.duration * self.rabi_amplitude / PI
    }

    /// ∫₀ᵀ Ω(t) dt.
    pub fn pulse_area(&self) -> f64 {
        match self.rabi {
            Waveform::Constant(c) => c * self.duration,
            _ => {
                let panels = 256;
                let h = self.duration / panels as f64;
                (0..panels).map(|k| gauss_legendre(&self.rabi, k as f64 * h, (k + 1) as f64 * h)).sum()
            }
        }
    }
}

/// Recomputes the phase of `control` as the running integral of its detuning
/// with φ(0) = 0.
pub fn phase_from_detuning(control: &ContinuousControl) -> ContinuousControl {
    let mut out = control.clone();
    out.phase = PhaseTable::build(&control.detuning, control.duration);
    out.phase_reference = 0.0;
    out
}

/// Constants of the elliptic-detuning robust control, all relative to Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RioParams {
    pub m: EllipticModulus,
    pub omega_over_rabi: f64,
    pub delta0_over_rabi: f64,
    pub area_multiple: f64,
}

/// Δ₀/Ω that makes the α = 0 transfer exact when m = 0.235, T·Ω = 1.86π and
/// the detuning spans exactly one period of cn (ω·T = 4K(m)).
pub const THIRD_ORDER_DELTA0: f64 = 1.113_164_010_284_207;

/// Δ₀/Ω and T·Ω/π at which both the transfer and the first-order amplitude
/// sensitivity vanish for m = 0.235, ω·T = 4K(m).
pub const THIRD_ORDER_EXACT_DELTA0: f64 = 1.113_876_433_315_444;
pub const THIRD_ORDER_EXACT_AREA: f64 = 1.858_811_631_248_377;

impl RioParams {
    /// Constants rounded to three decimals (m = 0.235, ω = 1.149Ω,
    /// Δ₀ = 1.114Ω, T = 1.86π/Ω). With these the transfer error is ≈ 2.4e-6.
    pub fn third_order_rounded() -> Self {
        Self {
            m: EllipticModulus::new(0.235).expect("valid"),
            omega_over_rabi: 1.149,
            delta0_over_rabi: 1.114,
            area_multiple: 1.86,
        }
    }

    /// Same family with ω fixed by ω·T = 4K(m) (one full cn period, so the
    /// detuning is exactly odd about mid-pulse) and Δ₀ re-solved for exact
    /// transfer. Rounds to ω ≈ 1.148Ω, Δ₀ ≈ 1.113Ω.
    pub fn third_order() -> Self {
        let m = EllipticModulus::new(0.235).expect("valid");
        let area_multiple = 1.86;
        Self {
            m,
            omega_over_rabi: 4.0 * complete_k(m) / (area_multiple * PI),
            delta0_over_rabi: THIRD_ORDER_DELTA0,
            area_multiple,
        }
    }

    /// Shortest member of the full-period family whose infidelity is O(α⁴)
    /// exactly, at m = 0.235 (the minimum of T over m lies within 1e-3 of
    /// it). Rounds to ω = 1.149Ω, Δ₀ = 1.114Ω, T = 1.859π/Ω.
    pub fn third_order_exact() -> Self {
        let m = EllipticModulus::new(0.235).expect("valid");
        Self {
            m,
            omega_over_rabi: 4.0 * complete_k(m) / (THIRD_ORDER_EXACT_AREA * PI),
            delta0_over_rabi: THIRD_ORDER_EXACT_DELTA0,
            area_multiple: THIRD_ORDER_EXACT_AREA,
        }
    }

    pub fn control(&self, rabi_amplitude: f64) -> Result<ContinuousControl> {
        if !(rabi_amplitude.is_finite() && rabi_amplitude > 0.0) {
            return Err(Error::InvalidInput(format!("Rabi amplitude must be positive, got {rabi_amplitude}")));
        }
        let detuning = Waveform::Elliptic {
            amplitude: self.delta0_over_rabi * rabi_amplitude,
            rate: self.omega_over_rabi * rabi_amplitude,
            shift: complete_k(self.m),
            modulus: self.m,
        };
        let duration = self.area_multiple * PI / rabi_amplitude;
        Ok(ContinuousControl::new(duration, rabi_amplitude, Waveform::Constant(rabi_amplitude), detuning)?
            .with_meta(ControlMeta { order: Some(3), source: "elliptic".into() }))
    }
}

/// Third-order robust control: constant Ω, T = 1.86π/Ω and
/// Δ(t) = Δ₀ cn(ωt + K(m), m).
pub fn rio_third_order(rabi_amplitude: f64) -> Result<ContinuousControl> {
    RioParams::third_order().control(rabi_amplitude)
}

/// Area multiple T·Ω/π of the fifth-order preset.
pub const FIFTH_ORDER_AREA: f64 = 2.71;

/// Sine-series coefficients (units of Ω, antisymmetric basis) of the
/// fifth-order preset: the least-squares solution of the fifth-order
/// conditions at T·Ω = 2.71π, just below the ≈2.711π minimum of the
/// 8-term basis. Transfer error ≈ 7e-7 at α = 0.
pub const FIFTH_ORDER_COEFFICIENTS: [f64; 8] = [
    -0.849_415_243_457_410_7,
    0.945_464_574_188_304_1,
    -0.132_075_878_810_572_62,
    -0.042_103_911_057_529_69,
    0.037_791_000_504_205_675,
    -0.013_349_322_734_702_535,
    0.000_820_451_500_843_010_8,
    -0.009_131_248_635_709_5,
];

/// Fifth-order robust control: constant Ω, T = 2.71π/Ω, detuning from the
/// stored optimizer solution.
pub fn rio_fifth_order(rabi_amplitude: f64) -> Result<ContinuousControl> {
    if !(rabi_amplitude.is_finite() && rabi_amplitude > 0.0) {
        return Err(Error::InvalidInput(format!("Rabi amplitude must be positive, got {rabi_amplitude}")));
    }
    let duration = FIFTH_ORDER_AREA * PI / rabi_amplitude;
    let detuning = Waveform::Sine(SineSeries {
        duration,
        scale: rabi_amplitude,
        coefficients: FIFTH_ORDER_COEFFICIENTS.to_vec(),
        antisymmetric: true,
    });
    Ok(ContinuousControl::new(duration, rabi_amplitude, Waveform::Constant(rabi_amplitude), detuning)?
        .with_meta(ControlMeta { order: Some(5), source: "optimizer".into() }))
}

/// Number of detuning samples written by [`WaveformFile::from_control`].
pub const DEFAULT_WAVEFORM_SAMPLES: usize = 4097;

/// Sine-series description of a detuning, stored in units of Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzRecord {
    pub coefficients: Vec<f64>,
    #[serde(default = "default_true")]
    pub antisymmetric: bool,
}

fn default_true() -> bool {
    true
}

/// On-disk waveform: constant Rabi frequency plus a sampled detuning.
///
/// Times are in ns and angular frequencies in rad/ns. When `ansatz` is
/// present it takes precedence over the samples, which are then informative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformFile {
    pub duration: f64,
    pub rabi_amplitude: f64,
    #[serde(default)]
    pub time_grid: Vec<f64>,
    #[serde(default)]
    pub detuning: Vec<f64>,
    #[serde(default)]
    pub meta: ControlMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzRecord>,
}

impl WaveformFile {
    /// Samples the detuning of `control` on `samples` equally spaced points
    /// spanning `[0, T]`. Sine-series detunings are also stored exactly.
    pub fn from_control(control: &ContinuousControl, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 samples, got {samples}")));
        }
        let t_end = control.duration();
        let time_grid: Vec<f64> =
            (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
        let detuning = time_grid.iter().map(|&t| control.detuning(t)).collect();
        let ansatz = match control.detuning_waveform() {
            Waveform::Sine(s) => Some(AnsatzRecord {
                coefficients: s.coefficients.iter().map(|c| c * s.scale / control.rabi_amplitude()).collect(),
                antisymmetric: s.antisymmetric,
            }),
            _ => None,
        };
        Ok(Self {
            duration: t_end,
            rabi_amplitude: control.rabi_amplitude(),
            time_grid,
            detuning,
            meta: control.meta().clone(),
            ansatz,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Builds the control described by a waveform file: constant Ω, detuning by
/// monotone cubic interpolation of the samples (or the stored sine series),
/// phase integrated from φ(0) = 0.
pub fn load_waveform(file: &WaveformFile) -> Result<ContinuousControl> {
    if !(file.duration.is_finite() && file.duration > 0.0) {
        return Err(Error::InvalidInput(format!("waveform duration must be positive, got {}", file.duration)));
    }
    let detuning = if let Some(a) = &file.ansatz {
        if a.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("ansatz coefficients must be finite".into()));
        }
        Waveform::Sine(SineSeries {
            duration: file.duration,
            scale: file.rabi_amplitude,
            coefficients: a.coefficients.clone(),
            antisymmetric: a.antisymmetric,
        })
    } else {
        if file.time_grid.len() < 2 {
            return Err(Error::InvalidInput("waveform needs at least 2 detuning samples or an ansatz".into()));
        }
        let (first, last) = (file.time_grid[0], file.time_grid[file.time_grid.len() - 1]);
        let span_tol = 1e-9 * file.duration;
        if first.abs() > span_tol || (last - file.duration).abs() > span_tol {
            return Err(Error::InvalidInput(format!(
                "time grid must span [0, {}], got [{first}, {last}]",
                file.duration
            )));
        }
        Waveform::Sampled(MonotoneCubic::new(file.time_grid.clone(), file.detuning.clone(), Extrapolation::Clamp)?)
    };
    Ok(ContinuousControl::new(file.duration, file.rabi_amplitude, Waveform::Constant(file.rabi_amplitude), detuning)?
        .with_meta(file.meta.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson rule, used only as an independent oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn rio_third_order_starts_at_zero_detuning_with_reference_area() {
        let c = rio_third_order(1.0).unwrap();
        assert!(c.detuning(0.0).abs() < 1e-12);
        assert!((c.area_multiple() - 1.86).abs() < 1e-12);
        assert!((c.pulse_area() - 1.86 * PI).abs() < 1e-12);
    }

    #[test]
    fn rounded_preset_peak_detuning_matches_grid_scan() {
        let c = RioParams::third_order_rounded().control(1.0).unwrap();
        let m = EllipticModulus::new(0.235).unwrap();
        let k = complete_k(m);
        let n = 200_000;
        let peak = (0..=n)
            .map(|j| {
                let t = c.duration() * j as f64 / n as f64;
                (1.114 * jacobi_cn(1.149 * t + k, m).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        let peak_control = (0..=n).map(|j| c.detuning(c.duration() * j as f64 / n as f64).abs()).fold(0.0, f64::max);
        assert!((peak - 1.114).abs() < 1e-6, "{peak}");
        assert!((peak_control - 1.114).abs() < 1e-6);
    }

    #[test]
    fn full_period_presets_are_odd_about_mid_pulse() {
        for p in [RioParams::third_order(), RioParams::third_order_exact()] {
            let c = p.control(1.0).unwrap();
            let t = c.duration();
            for j in 0..=50 {
                let s = t * j as f64 / 100.0;
                assert!((c.detuning(s) + c.detuning(t - s)).abs() < 1e-12);
            }
        }
        // The rounded constants miss a full period, so the oddness is only approximate.
        let c = RioParams::third_order_rounded().control(1.0).unwrap();
        let t = c.duration();
        let worst = (0..=50).map(|j| (c.detuning(t * j as f64 / 100.0) + c.detuning(t - t * j as f64 / 100.0)).abs()).fold(0.0, f64::max);
        assert!(worst > 1e-6 && worst < 1e-2, "{worst}");
    }

    #[test]
    fn phase_matches_simpson_oracle() {
        let c = rio_third_order(1.0).unwrap();
        let t = c.duration();
        for &s in &[0.3, 0.5, 0.77, 1.0] {
            let oracle = simpson(|x| c.detuning(x), 0.0, s * t, 20_000);
            assert!((c.phase(s * t) - oracle).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn phase_of_constant_detuning_is_linear() {
        let c = ContinuousControl::constant(1.0, 3.0, 0.7).unwrap();
        for &t in &[0.0, 0.4, 1.9, 3.0] {
            assert!((c.phase(t) - 0.7 * t).abs() < 1e-13);
        }
        let zero = ContinuousControl::constant(1.0, 3.0, 0.0).unwrap();
        assert_eq!(zero.phase(2.5), 0.0);
        let shifted = phase_from_detuning(&c.clone().with_phase_reference(4.0));
        assert!(shifted.phase(0.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_controls_are_rejected() {
        assert!(ContinuousControl::constant(1.0, 0.0, 0.0).is_err());
        assert!(ContinuousControl::constant(-1.0, 1.0, 0.0).is_err());
        assert!(rio_third_order(0.0).is_err());
        assert!(rio_fifth_order(f64::NAN).is_err());
    }

    #[test]
    fn fifth_order_preset_has_reference_area_and_zero_end_detuning() {
        let c = rio_fifth_order(2.0).unwrap();
        assert!((c.area_multiple() - 2.71).abs() < 1e-12);
        assert!(c.detuning(0.0).abs() < 1e-12 && c.detuning(c.duration()).abs() < 1e-12);
        assert!(c.envelope(0.5) == 1.0);
    }

    #[test]
    fn waveform_file_round_trips_rio_within_interpolation_tolerance() {
        let c = rio_third_order(1.0).unwrap();
        let file = WaveformFile::from_control(&c, DEFAULT_WAVEFORM_SAMPLES).unwrap();
        let loaded = load_waveform(&WaveformFile::parse(&file.to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(loaded.meta().order, Some(3));
        for j in 0..=997 {
            let t = c.duration() * j as f64 / 997.0;
            assert!((loaded.detuning(t) - c.detuning(t)).abs() < 1e-6, "t={t}");
        }
        assert!((loaded.phase(c.duration()) - c.phase(c.duration())).abs() < 1e-6);
    }

    #[test]
    fn waveform_file_keeps_sine_series_exactly() {
        let c = rio_fifth_order(0.5).unwrap();
        let file = WaveformFile::from_control(&c, 17).unwrap();
        let loaded = load_waveform(&file).unwrap();
        assert!((loaded.area_multiple() - 2.71).abs() < 1e-12);
        for j in 0..=50 {
            let t = c.duration() * j as f64 / 50.0;
            assert!((loaded.detuning(t) - c.detuning(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn pi_pulse_document_loads() {
        let doc = r#"{"duration": 3.141592653589793, "rabi_amplitude": 1.0,
            "time_grid": [0.0, 3.141592653589793], "detuning": [0.0, 0.0],
            "meta": {"order": null, "source": "manual"}}"#;
        let c = load_waveform(&WaveformFile::parse(doc).unwrap()).unwrap();
        assert!((c.area_multiple() - 1.0).abs() < 1e-15);
        assert_eq!(c.detuning(1.0), 0.0);
    }

    #[test]
    fn malformed_waveform_files_are_rejected() {
        assert!(WaveformFile::parse("{\"duration\": 1.0}").is_err());
        let bad_grid = r#"{"duration": 1.0, "rabi_amplitude": 1.0, "time_grid": [0.0, 0.6, 0.5, 1.0], "detuning": [0,0,0,0]}"#;
        assert!(load_waveform(&WaveformFile::parse(bad_grid).unwrap()).is_err());
        let bad_duration = r#"{"duration": 0.0, "rabi_amplitude": 1.0, "time_grid": [0.0, 1.0], "detuning": [0,0]}"#;
        assert!(load_waveform(&WaveformFile::parse(bad_duration).unwrap()).is_err());
        let short = r#"{"duration": 2.0, "rabi_amplitude": 1.0, "time_grid": [0.0, 1.0], "detuning": [0,0]}"#;
        assert!(load_waveform(&WaveformFile::parse(short).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn phase_is_linear_in_detuning(a in -2.0..2.0_f64, b in -2.0..2.0_f64, w in 0.1..3.0_f64) {
            let t = 4.0;
            let d1 = Waveform::Custom(Arc::new(move |x: f64| a * (w * x).sin()));
            let d2 = Waveform::Custom(Arc::new(move |x: f64| b * x * x));
            let sum = Waveform::Custom(Arc::new(move |x: f64| a * (w * x).sin() + b * x * x));
            let c1 = ContinuousControl::new(t, 1.0, Waveform::Constant(1.0), d1).unwrap();
            let c2 = ContinuousControl::new(t, 1.0, Waveform::Constant(1.0), d2).unwrap();
            let c3 = ContinuousControl::new(t, 1.0, Waveform::Constant(1.0), sum).unwrap();
            for &s in &[0.7, 2.2, 4.0] {
                prop_assert!((c3.phase(s) - c1.phase(s) - c2.phase(s)).abs() < 1e-9);
            }
        }

        #[test]
        fn envelope_stays_in_unit_interval(scale in 0.0..3.0_f64, s in 0.0..1.0_f64) {
            let c = rio_third_order(1.0).unwrap().with_amplitude_scale(scale);
            let e = c.envelope(s);
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
