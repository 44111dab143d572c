//! Compilation of a continuous control into a train of small-area subpulses
//! with piecewise-constant phase, and the reverse map to the coarse-grained
//! effective control.
//!
//! A train of `N` pulses with delay `τ` occupies `[start, start + Nτ]`; pulse
//! `n` is centred at `start + (n + ½)τ`. Pulse `n` carries area
//! `Aₙ = √π σ Ωₙ` and phase `φₙ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::control::{ContinuousControl, ControlMeta, Waveform};
use crate::error::{Error, Result};
use crate::interp::{Extrapolation, MonotoneCubic};

pub const MIN_TAU_OVER_SIGMA: f64 = 4.0;
pub const MIN_PULSES: usize = 5;
pub const DEFAULT_TAU_OVER_SIGMA: f64 = 6.0;
pub const DEFAULT_PULSES: usize = 15;
pub const DEFAULT_RWA_THRESHOLD: f64 = 5.0;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Subpulse envelope Λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Λ(x) = exp(−x²).
    #[default]
    Gaussian,
    /// Λ(x) = 1 for |x| ≤ √π/2, so that the area is √π σ Ω as for the
    /// Gaussian.
    Square,
}

impl PulseShape {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            PulseShape::Gaussian => (-x * x).exp(),
            PulseShape::Square => {
                if x.abs() <= 0.5 * SQRT_PI {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width (in units of σ) beyond which Λ is negligible.
    pub fn support(self) -> f64 {
        match self {
            PulseShape::Gaussian => 6.5,
            PulseShape::Square => 0.5 * SQRT_PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subpulse {
    #[serde(rename = "t_ns")]
    pub center: f64,
    #[serde(rename = "omega_rad_per_ns")]
    pub peak_rabi: f64,
    #[serde(rename = "phase_rad")]
    pub phase: f64,
}

/// Contiguous train of identical-shape subpulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrainFile", into = "TrainFile")]
pub struct SubpulseTrain {
    sigma: f64,
    tau: f64,
    shape: PulseShape,
    pulses: Vec<Subpulse>,
}

#[derive(Serialize, Deserialize)]
struct TrainFile {
    sigma_ns: f64,
    tau_ns: f64,
    #[serde(default)]
    shape: PulseShape,
    pulses: Vec<Subpulse>,
}

impl TryFrom<TrainFile> for SubpulseTrain {
    type Error = Error;

    fn try_from(f: TrainFile) -> Result<Self> {
        SubpulseTrain::new(f.sigma_ns, f.tau_ns, f.shape, f.pulses)
    }
}

impl From<SubpulseTrain> for TrainFile {
    fn from(t: SubpulseTrain) -> Self {
        TrainFile { sigma_ns: t.sigma, tau_ns: t.tau, shape: t.shape, pulses: t.pulses }
    }
}

impl SubpulseTrain {
    /// Checks contiguity (centres spaced by `tau`) and non-negative peaks.
    /// Timescale conditions are left to [`validate`].
    pub fn new(sigma: f64, tau: f64, shape: PulseShape, pulses: Vec<Subpulse>) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidInput(format!("sigma and tau must be positive, got {sigma}, {tau}")));
        }
        for (n, p) in pulses.iter().enumerate() {
            if !(p.center.is_finite() && p.phase.is_finite() && p.peak_rabi.is_finite()) {
                return Err(Error::InvalidInput(format!("pulse {n} has non-finite fields")));
            }
            if p.peak_rabi < 0.0 {
                return Err(Error::InvalidInput(format!("pulse {n} has negative peak {}", p.peak_rabi)));
            }
        }
        for (n, w) in pulses.windows(2).enumerate() {
            if ((w[1].center - w[0].center) - tau).abs() > 1e-9 * tau.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "pulses {n} and {} are not separated by tau = {tau}",
                    n + 1
                )));
            }
        }
        Ok(Self { sigma, tau, shape, pulses })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn shape(&self) -> PulseShape {
        self.shape
    }

    pub fn pulses(&self) -> &[Subpulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Left edge of the first pulse interval.
    pub fn start(&self) -> f64 {
        self.pulses.first().map_or(0.0, |p| p.center - 0.5 * self.tau)
    }

    /// `N τ`.
    pub fn duration(&self) -> f64 {
        self.pulses.len() as f64 * self.tau
    }

    #[inline]
    pub fn pulse_area(&self, n: usize) -> f64 {
        SQRT_PI * self.sigma * self.pulses[n].peak_rabi
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.pulse_area(n)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.areas().iter().sum()
    }

    /// Phase steps `Δφₙ = φₙ − φₙ₋₁` for `n = 1..N`.
    pub fn phase_steps(&self) -> Vec<f64> {
        self.pulses.windows(2).map(|w| w[1].phase - w[0].phase).collect()
    }

    /// Every peak multiplied by `factor`.
    pub fn with_amplitude_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pulses {
            p.peak_rabi *= factor;
        }
        out
    }

    /// Every width multiplied by `factor` at fixed peaks (interaction-time
    /// inhomogeneity).
    pub fn with_width_scale(&self, factor: f64) -> Self {
        Self { sigma: self.sigma * factor, ..self.clone() }
    }

    pub fn with_phases(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.len() {
            return Err(Error::InvalidInput(format!("expected {} phases, got {}", self.len(), phases.len())));
        }
        let mut out = self.clone();
        for (p, &phi) in out.pulses.iter_mut().zip(phases) {
            p.phase = phi;
        }
        Ok(out)
    }

    /// `Σₙ Ωₙ Λ((t − tₙ)/σ) e^{iφₙ}` over the pulses whose envelope reaches `t`.
    pub(crate) fn coupling(&self, t: f64) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        if self.pulses.is_empty() {
            return acc;
        }
        let reach = (self.shape.support() * self.sigma / self.tau).ceil() as isize + 1;
        let centre = ((t - self.pulses[0].center) / self.tau).round() as isize;
        let lo = (centre - reach).max(0) as usize;
        let hi = ((centre + reach).max(-1) + 1).min(self.pulses.len() as isize).max(0) as usize;
        for p in self.pulses.get(lo..hi).unwrap_or(&[]) {
            let lambda = self.shape.eval((t - p.center) / self.sigma);
            if lambda != 0.0 {
                acc += num_complex::Complex64::from_polar(p.peak_rabi * lambda, p.phase);
            }
        }
        acc
    }
}

/// Samples `control` into `n` subpulses with delay `τ = T/n` and width
/// `σ = τ / tau_over_sigma`. Peaks follow `Aₙ = τ Ω(tₙ)` and phases are
/// sampled at the pulse peaks.
pub fn digitize(control: &ContinuousControl, n: usize, tau_over_sigma: f64) -> Result<SubpulseTrain> {
    if n < MIN_PULSES {
        return Err(Error::Timescale(format!("need at least {MIN_PULSES} pulses for tau << T, got {n}")));
    }
    if !(tau_over_sigma.is_finite() && tau_over_sigma >= MIN_TAU_OVER_SIGMA) {
        return Err(Error::Timescale(format!(
            "tau/sigma must be at least {MIN_TAU_OVER_SIGMA}, got {tau_over_sigma}"
        )));
    }
    let tau = control.duration() / n as f64;
    let sigma = tau / tau_over_sigma;
    let gain = tau / (SQRT_PI * sigma);
    let pulses = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * tau;
            let phase = control.phase(t);
            if !phase.is_finite() {
                return Err(Error::InvalidInput(format!("control phase undefined at t = {t}")));
            }
            Ok(Subpulse { center: t, peak_rabi: gain * control.rabi(t), phase })
        })
        .collect::<Result<Vec<_>>>()?;
    SubpulseTrain::new(sigma, tau, PulseShape::Gaussian, pulses)
}

/// Coarse-grained control with `Ω_eff(tₙ) = Aₙ/τ` and
/// `Δ_eff(tₙ − τ/2) = Δφₙ/τ`, interpolated monotonically between samples.
/// Times are shifted so that the train starts at zero.
pub fn effective_control(train: &SubpulseTrain) -> Result<ContinuousControl> {
    if train.len() < 2 {
        return Err(Error::InvalidInput("effective control needs at least two pulses".into()));
    }
    let tau = train.tau();
    let start = train.start();
    let centres: Vec<f64> = train.pulses().iter().map(|p| p.center - start).collect();
    let rabi: Vec<f64> = train.areas().iter().map(|a| a / tau).collect();
    let peak = rabi.iter().cloned().fold(0.0, f64::max);
    let mids: Vec<f64> = centres[1..].iter().map(|t| t - 0.5 * tau).collect();
    let detuning: Vec<f64> = train.phase_steps().iter().map(|d| d / tau).collect();

    let rabi = Waveform::Sampled(MonotoneCubic::new(centres.clone(), rabi, Extrapolation::Clamp)?);
    let detuning = Waveform::Sampled(MonotoneCubic::new(mids, detuning, Extrapolation::Linear)?);
    let control = ContinuousControl::new(train.duration(), if peak > 0.0 { peak } else { 1.0 }, rabi, detuning)?
        .with_meta(ControlMeta { order: None, source: "effective".into() });
    // Anchor the running phase so that φ_eff(t₀) = φ₀.
    let offset = train.pulses()[0].phase - control.phase(centres[0]);
    Ok(control.with_phase_reference(offset))
}

/// Diagnostics for the conditions under which the train behaves like its
/// effective control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// `min √|4π² − Δφ²| / A` over pulses.
    pub second_rwa_margin: f64,
    pub tau_over_sigma: f64,
    pub duration_over_tau: f64,
    /// `∫A dt / τ`.
    pub adiabatic_area_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
    pub violations: Vec<String>,
}

pub fn validate(train: &SubpulseTrain) -> ValidityReport {
    validate_with_threshold(train, DEFAULT_RWA_THRESHOLD)
}

pub fn validate_with_threshold(train: &SubpulseTrain, threshold: f64) -> ValidityReport {
    let areas = train.areas();
    let steps = train.phase_steps();
    let mut margin = f64::INFINITY;
    for (n, &a) in areas.iter().enumerate() {
        if a <= 0.0 {
            continue;
        }
        // Pulse 0 has no preceding step; use the step that follows it.
        let dphi = if n == 0 { steps.first().copied().unwrap_or(0.0) } else { steps[n - 1] };
        margin = margin.min((4.0 * PI * PI - dphi * dphi).abs().sqrt() / a);
    }

    let tau_over_sigma = train.tau() / train.sigma();
    let duration_over_tau = train.len() as f64;
    let mut violations = Vec::new();
    if margin < threshold {
        violations.push(format!("second-RWA margin {margin:.3} below {threshold}"));
    }
    if tau_over_sigma < MIN_TAU_OVER_SIGMA {
        violations.push(format!("tau/sigma = {tau_over_sigma:.3} below {MIN_TAU_OVER_SIGMA}"));
    }
    if train.len() < MIN_PULSES {
        violations.push(format!("T/tau = {} below {MIN_PULSES}", train.len()));
    }
    ValidityReport {
        second_rwa_margin: margin,
        tau_over_sigma,
        duration_over_tau,
        // ∫A dt ≈ τ ΣAₙ.
        adiabatic_area_ratio: areas.iter().sum::<f64>(),
        threshold,
        pass: violations.is_empty(),
        violations,
    }
}

/// Rewrites the phases so that `Δφₙ/τ` reproduces the control detuning at
/// `tₙ − τ/2` through order `p` of the odd Taylor series
/// `Δφ = τφ′ + (τ/2)³φ‴/3 + …`. Order 0 leaves the train unchanged; order 1
/// subtracts `τ²Δ′(t)/24` from the sampled phase (φ₀ is kept).
pub fn taylor_phase_correction(
    train: &SubpulseTrain,
    control: &ContinuousControl,
    order: u32,
) -> Result<SubpulseTrain> {
    match order {
        0 => Ok(train.clone()),
        1 => {
            let tau = train.tau();
            let start = train.start();
            let h = 1e-4 * tau;
            let slope = |t: f64| control.detuning_waveform().derivative(t, h);
            let reference = train.pulses().first().map_or(0.0, |p| slope(p.center - start));
            let phases: Vec<f64> = train
                .pulses()
                .iter()
                .map(|p| p.phase - tau * tau / 24.0 * (slope(p.center - start) - reference))
                .collect();
            train.with_phases(&phases)
        }
        p => Err(Error::InvalidInput(format!("Taylor correction order {p} not supported (0 or 1)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{rio_third_order, RioParams};

    fn drio3() -> (ContinuousControl, SubpulseTrain) {
        let c = rio_third_order(1.0).unwrap();
        let t = digitize(&c, 15, 6.0).unwrap();
        (c, t)
    }

    #[test]
    fn rio_train_has_constant_peaks_and_exact_area() {
        let (_, train) = drio3();
        let expected = 6.0 / SQRT_PI;
        for p in train.pulses() {
            assert!((p.peak_rabi - expected).abs() < 1e-12);
        }
        assert!((expected - 3.385).abs() < 1e-3);
        assert!((train.total_area() - 1.86 * PI).abs() < 1e-12);
        assert!((train.duration() - 1.86 * PI).abs() < 1e-12);
    }

    #[test]
    fn experimental_geometry() {
        // σ = 3√2 ns, τ = 6σ, N = 15 gives T = 270√2 ns ≈ 381.8 ns.
        let sigma = 3.0 * 2f64.sqrt();
        let duration = 15.0 * 6.0 * sigma;
        let c = rio_third_order(1.86 * PI / duration).unwrap();
        let train = digitize(&c, 15, 6.0).unwrap();
        assert!((train.sigma() - sigma).abs() < 1e-12);
        assert!((train.duration() - 381.8).abs() < 0.05);
        assert!((train.duration() - 382.0).abs() / 382.0 < 1e-3);
    }

    #[test]
    fn timescale_preconditions() {
        let c = rio_third_order(1.0).unwrap();
        assert!(matches!(digitize(&c, 4, 6.0), Err(Error::Timescale(_))));
        assert!(matches!(digitize(&c, 15, 3.9), Err(Error::Timescale(_))));
        let fine = digitize(&c, 15, 12.0).unwrap();
        assert!((fine.sigma() - drio3().1.sigma() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn phases_are_sampled_at_pulse_peaks() {
        let (c, train) = drio3();
        for p in train.pulses() {
            assert_eq!(p.phase, c.phase(p.center));
        }
    }

    #[test]
    fn effective_control_recovers_rio() {
        let (c, train) = drio3();
        let eff = effective_control(&train).unwrap();
        let tau = train.tau();
        for (n, p) in train.pulses().iter().enumerate() {
            assert!((eff.rabi(p.center) - 1.0).abs() < 1e-12);
            if n > 0 {
                let t = p.center - 0.5 * tau;
                // Δφ/τ − Δ = τ²Δ″/24 + O(τ⁴): below 1% of Δ₀ at N = 15.
                let h = 1e-3;
                let curvature = (c.detuning(t + h) - 2.0 * c.detuning(t) + c.detuning(t - h)) / (h * h);
                let err = eff.detuning(t) - c.detuning(t);
                assert!(err.abs() < 1e-2 * 1.114, "n={n}");
                assert!((err - tau * tau / 24.0 * curvature).abs() < 2e-4, "n={n}");
            }
        }
        assert!((eff.pulse_area() - train.total_area()).abs() < 1e-12);
        assert!((eff.phase(train.pulses()[0].center) - train.pulses()[0].phase).abs() < 1e-12);
    }

    #[test]
    fn effective_control_edge_cases() {
        let one = SubpulseTrain::new(1.0, 6.0, PulseShape::Gaussian, vec![Subpulse { center: 3.0, peak_rabi: 1.0, phase: 0.0 }]).unwrap();
        assert!(effective_control(&one).is_err());

        let flat = SubpulseTrain::new(
            1.0,
            6.0,
            PulseShape::Gaussian,
            (0..6).map(|n| Subpulse { center: 3.0 + 6.0 * n as f64, peak_rabi: 0.1, phase: 0.7 }).collect(),
        )
        .unwrap();
        let eff = effective_control(&flat).unwrap();
        for i in 0..=50 {
            assert_eq!(eff.detuning(i as f64 * 36.0 / 50.0), 0.0);
        }

        let two = SubpulseTrain::new(
            0.2,
            1.0,
            PulseShape::Gaussian,
            vec![Subpulse { center: 0.5, peak_rabi: 1.0, phase: 0.0 }, Subpulse { center: 1.5, peak_rabi: 1.0, phase: 0.1 }],
        )
        .unwrap();
        let eff = effective_control(&two).unwrap();
        assert!((eff.detuning(1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validity_of_rio_train() {
        let (_, train) = drio3();
        let report = validate(&train);
        let max_step = train.phase_steps().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        // τΔ₀ bounds the phase step.
        assert!(max_step <= 1.12 * 1.86 * PI / 15.0);
        let expected = (4.0 * PI * PI - max_step * max_step).sqrt() / (1.86 * PI / 15.0);
        assert!((report.second_rwa_margin - expected).abs() < 1e-9);
        assert!(report.second_rwa_margin > 15.9 && report.second_rwa_margin < 16.2);
        assert!(report.pass);
        assert!((report.adiabatic_area_ratio - 1.86 * PI).abs() < 1e-12);
    }

    #[test]
    fn strong_and_short_trains_fail_validation() {
        let strong: Vec<Subpulse> =
            (0..15).map(|n| Subpulse { center: 3.0 + 6.0 * n as f64, peak_rabi: 2.0 * PI / SQRT_PI, phase: 0.0 }).collect();
        let train = SubpulseTrain::new(1.0, 6.0, PulseShape::Gaussian, strong).unwrap();
        let r = validate(&train);
        assert!((r.second_rwa_margin - 1.0).abs() < 1e-12);
        assert!(!r.pass);

        let c = rio_third_order(1.0).unwrap();
        let short = digitize(&c, 5, 6.0).unwrap();
        let three = SubpulseTrain::new(short.sigma(), short.tau(), PulseShape::Gaussian, short.pulses()[..3].to_vec()).unwrap();
        let r = validate(&three);
        assert!(r.second_rwa_margin > 5.0);
        assert!(!r.pass);
        assert!(r.violations.iter().any(|v| v.contains("T/tau")));
    }

    #[test]
    fn non_contiguous_train_rejected() {
        let pulses = vec![
            Subpulse { center: 0.5, peak_rabi: 1.0, phase: 0.0 },
            Subpulse { center: 2.5, peak_rabi: 1.0, phase: 0.0 },
        ];
        assert!(SubpulseTrain::new(0.1, 1.0, PulseShape::Gaussian, pulses).is_err());
    }

    #[test]
    fn taylor_correction_orders() {
        let (c, train) = drio3();
        assert_eq!(taylor_phase_correction(&train, &c, 0).unwrap(), train);
        assert!(taylor_phase_correction(&train, &c, 2).is_err());

        let linear = ContinuousControl::constant(1.0, 10.0, 0.3).unwrap();
        let lt = digitize(&linear, 10, 6.0).unwrap();
        let corrected = taylor_phase_correction(&lt, &linear, 1).unwrap();
        for (a, b) in corrected.pulses().iter().zip(lt.pulses()) {
            assert!((a.phase - b.phase).abs() < 1e-12);
        }
    }

    #[test]
    fn taylor_correction_reduces_detuning_mismatch() {
        let (c, train) = drio3();
        let corrected = taylor_phase_correction(&train, &c, 1).unwrap();
        let mismatch = |t: &SubpulseTrain| {
            t.pulses()
                .windows(2)
                .map(|w| ((w[1].phase - w[0].phase) / t.tau() - c.detuning(w[1].center - 0.5 * t.tau())).abs())
                .fold(0.0, f64::max)
        };
        assert!(mismatch(&corrected) < mismatch(&train) / 10.0);
    }

    #[test]
    fn digitize_is_equivariant_under_time_rescaling() {
        let base = digitize(&rio_third_order(1.0).unwrap(), 15, 6.0).unwrap();
        let slow = digitize(&RioParams::third_order().control(0.25).unwrap(), 15, 6.0).unwrap();
        for (n, (a, b)) in base.pulses().iter().zip(slow.pulses()).enumerate() {
            assert!((a.phase - b.phase).abs() < 1e-9);
            assert!((base.pulse_area(n) - slow.pulse_area(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn train_json_layout() {
        let (_, train) = drio3();
        let v: serde_json::Value = serde_json::to_value(&train).unwrap();
        assert!(v["sigma_ns"].is_number());
        assert!(v["tau_ns"].is_number());
        assert!(v["pulses"][0]["t_ns"].is_number());
        assert!(v["pulses"][0]["omega_rad_per_ns"].is_number());
        assert!(v["pulses"][0]["phase_rad"].is_number());
        let back: SubpulseTrain = serde_json::from_value(v).unwrap();
        assert_eq!(back, train);
    }
}
