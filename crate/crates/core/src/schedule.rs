//! Pulse-program export of a subpulse train as parametric Gaussian
//! instructions on a fixed scheduler grid, and the inverse parse.
//!
//! Conventions: `sigma_ns` is the standard deviation of the instruction
//! envelope `exp(−(t − t_c)²/2σ_s²)`, i.e. `σ_s = σ/√2` for the train's
//! `exp(−(t − t_c)²/σ²)`. Each instruction window spans `±min(3σ, τ/2)`
//! about the pulse centre, on the `dt_ns` grid. Amplitudes are peak
//! Rabi frequencies divided by `max_rabi_rad_per_ns` and rounded to
//! `2¹⁵` levels.

use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digitize::{PulseShape, Subpulse, SubpulseTrain};
use crate::error::{Error, Result};

pub const SCHEDULE_VERSION: &str = "1.0";
/// Default scheduler resolution in ns.
pub const DEFAULT_DT_NS: f64 = 2.0 / 9.0;
pub const AMPLITUDE_LEVELS: f64 = 32768.0;
pub const DEFAULT_CHANNEL: &str = "d0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionKind {
    ParametricGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    #[serde(rename = "type")]
    pub kind: InstructionKind,
    pub t0_ns: f64,
    pub duration_ns: f64,
    pub sigma_ns: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    pub channel: String,
}

impl Instruction {
    pub fn center_ns(&self) -> f64 {
        self.t0_ns + 0.5 * self.duration_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMetadata {
    pub protocol_tag: String,
    pub order: Option<u32>,
    #[serde(rename = "N")]
    pub n: usize,
    pub total_duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub version: String,
    pub dt_ns: f64,
    pub max_rabi_rad_per_ns: f64,
    pub instructions: Vec<Instruction>,
    pub metadata: ScheduleMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub dt_ns: f64,
    /// Declared full-scale Rabi frequency; defaults to the largest peak.
    pub max_rabi_rad_per_ns: Option<f64>,
    pub channel: String,
    pub protocol_tag: String,
    pub order: Option<u32>,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self {
            dt_ns: DEFAULT_DT_NS,
            max_rabi_rad_per_ns: None,
            channel: DEFAULT_CHANNEL.into(),
            protocol_tag: "custom".into(),
            order: None,
        }
    }
}

fn quantize(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Emits one instruction per subpulse.
pub fn export(train: &SubpulseTrain, options: &ExportOptions) -> Result<ScheduleDocument> {
    let dt = options.dt_ns;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt_ns must be positive, got {dt}")));
    }
    if train.shape() != PulseShape::Gaussian {
        return Err(Error::InvalidInput("only Gaussian trains can be exported".into()));
    }
    let peak = train.pulses().iter().map(|p| p.peak_rabi).fold(0.0, f64::max);
    let max_rabi = options.max_rabi_rad_per_ns.unwrap_or(if peak > 0.0 { peak } else { 1.0 });
    if !(max_rabi.is_finite() && max_rabi > 0.0) {
        return Err(Error::InvalidInput(format!("declared maximum Rabi rate must be positive, got {max_rabi}")));
    }
    if peak > max_rabi * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "peak Rabi rate {peak} rad/ns exceeds the declared maximum {max_rabi} rad/ns"
        )));
    }
    let half = (3.0 * train.sigma()).min(0.5 * train.tau());
    // Rounded down so that consecutive windows cannot overlap after their
    // starts are rounded.
    let duration = ((2.0 * half / dt + 1e-9).floor() * dt).max(dt);
    let instructions = train
        .pulses()
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let t0 = quantize(p.center - 0.5 * duration, dt);
            if t0 < -1e-9 * dt {
                return Err(Error::InvalidInput(format!("pulse {n} would start at negative time {t0} ns")));
            }
            Ok(Instruction {
                kind: InstructionKind::ParametricGaussian,
                t0_ns: t0.max(0.0),
                duration_ns: duration,
                sigma_ns: train.sigma() / SQRT_2,
                amplitude: (p.peak_rabi / max_rabi * AMPLITUDE_LEVELS).round() / AMPLITUDE_LEVELS,
                phase_rad: p.phase,
                channel: options.channel.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = ScheduleDocument {
        version: SCHEDULE_VERSION.into(),
        dt_ns: dt,
        max_rabi_rad_per_ns: max_rabi,
        instructions,
        metadata: ScheduleMetadata {
            protocol_tag: options.protocol_tag.clone(),
            order: options.order,
            n: train.len(),
            total_duration_ns: train.duration(),
        },
    };
    doc.validate()?;
    Ok(doc)
}

impl ScheduleDocument {
    /// Checks amplitudes, time ordering, grid alignment and non-overlap.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ns.is_finite() && self.dt_ns > 0.0) {
            return Err(Error::InvalidInput(format!("dt_ns must be positive, got {}", self.dt_ns)));
        }
        if self.metadata.n != self.instructions.len() {
            return Err(Error::InvalidInput(format!(
                "metadata declares N = {} but there are {} instructions",
                self.metadata.n,
                self.instructions.len()
            )));
        }
        let on_grid = |x: f64| ((x / self.dt_ns) - (x / self.dt_ns).round()).abs() < 1e-6;
        for (n, ins) in self.instructions.iter().enumerate() {
            if ins.t0_ns < 0.0 {
                return Err(Error::InvalidInput(format!("instruction {n} starts at negative time {} ns", ins.t0_ns)));
            }
            if !(0.0..=1.0).contains(&ins.amplitude) {
                return Err(Error::InvalidInput(format!(
                    "instruction {n} amplitude {} is outside [0, 1] of the declared maximum",
                    ins.amplitude
                )));
            }
            if !(ins.sigma_ns > 0.0 && ins.duration_ns > 0.0 && ins.phase_rad.is_finite()) {
                return Err(Error::InvalidInput(format!("instruction {n} has invalid width, duration or phase")));
            }
            if !on_grid(ins.t0_ns) || !on_grid(ins.duration_ns) {
                return Err(Error::InvalidInput(format!("instruction {n} is not aligned to dt = {} ns", self.dt_ns)));
            }
        }
        for (n, w) in self.instructions.windows(2).enumerate() {
            if w[1].t0_ns < w[0].t0_ns + w[0].duration_ns - 1e-6 * self.dt_ns {
                return Err(Error::InvalidInput(format!("instructions {n} and {} overlap or are out of order", n + 1)));
            }
        }
        Ok(())
    }

    /// Rebuilds the train. Centres are snapped back onto an evenly spaced
    /// grid; each must lie within `dt` of it.
    pub fn to_train(&self) -> Result<SubpulseTrain> {
        self.validate()?;
        let first = self.instructions.first().ok_or_else(|| Error::InvalidInput("schedule has no instructions".into()))?;
        let n = self.instructions.len();
        let centers: Vec<f64> = self.instructions.iter().map(Instruction::center_ns).collect();
        let tau = if n > 1 { (centers[n - 1] - centers[0]) / (n - 1) as f64 } else { self.metadata.total_duration_ns };
        if !(tau > 0.0) {
            return Err(Error::InvalidInput("cannot infer a positive pulse spacing".into()));
        }
        for (k, c) in centers.iter().enumerate() {
            if (c - (centers[0] + k as f64 * tau)).abs() > self.dt_ns {
                return Err(Error::InvalidInput(format!("instruction {k} is off the evenly spaced pulse grid")));
            }
        }
        let sigma = first.sigma_ns * SQRT_2;
        if self.instructions.iter().any(|i| (i.sigma_ns * SQRT_2 - sigma).abs() > 1e-9 * sigma) {
            return Err(Error::InvalidInput("instructions have different widths".into()));
        }
        let pulses = self
            .instructions
            .iter()
            .enumerate()
            .map(|(k, i)| Subpulse {
                center: centers[0] + k as f64 * tau,
                peak_rabi: i.amplitude * self.max_rabi_rad_per_ns,
                phase: i.phase_rad,
            })
            .collect();
        SubpulseTrain::new(sigma, tau, PulseShape::Gaussian, pulses)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::rio_third_order;
    use crate::digitize::digitize;
    use crate::propagate::{propagate_delta_train, propagate_full, QubitState};

    fn drio3_ns() -> SubpulseTrain {
        let t = 270.0 * SQRT_2;
        let c = rio_third_order(1.86 * std::f64::consts::PI / t).unwrap();
        digitize(&c, 15, 6.0).unwrap()
    }

    #[test]
    fn drio3_exports_fifteen_gaussians_spanning_382_ns() {
        let train = drio3_ns();
        let doc = export(&train, &ExportOptions::default()).unwrap();
        assert_eq!(doc.instructions.len(), 15);
        let last = doc.instructions.last().unwrap();
        let span = last.t0_ns + last.duration_ns - doc.instructions[0].t0_ns;
        assert!((span - 382.0).abs() < 1.0, "{span}");
        assert!((doc.metadata.total_duration_ns - 381.84).abs() < 0.01);
        assert!((doc.instructions[0].sigma_ns - 3.0).abs() < 1e-12);
        assert!(doc.instructions.iter().all(|i| i.amplitude == 1.0));
    }

    #[test]
    fn round_trip_preserves_populations() {
        let train = drio3_ns();
        let doc = ScheduleDocument::parse(&export(&train, &ExportOptions::default()).unwrap().to_json().unwrap()).unwrap();
        let back = doc.to_train().unwrap();
        assert_eq!(back.len(), train.len());
        let p0 = propagate_delta_train(&train, QubitState::ground()).final_transfer();
        let p1 = propagate_delta_train(&back, QubitState::ground()).final_transfer();
        assert!((p0 - p1).abs() <= 1e-4);
        let f0 = propagate_full(&train, QubitState::ground(), 1e-9).unwrap().final_transfer();
        let f1 = propagate_full(&back, QubitState::ground(), 1e-9).unwrap().final_transfer();
        assert!((f0 - f1).abs() <= 1e-4);
    }

    #[test]
    fn empty_train_gives_empty_valid_document() {
        let train = SubpulseTrain::new(1.0, 6.0, PulseShape::Gaussian, vec![]).unwrap();
        let doc = export(&train, &ExportOptions::default()).unwrap();
        assert!(doc.instructions.is_empty());
        assert!(ScheduleDocument::parse(&doc.to_json().unwrap()).is_ok());
    }

    #[test]
    fn amplitude_above_declared_maximum_is_rejected() {
        let train = drio3_ns();
        let peak = train.pulses()[0].peak_rabi;
        let opts = ExportOptions { max_rabi_rad_per_ns: Some(0.5 * peak), ..Default::default() };
        assert!(export(&train, &opts).is_err());
        let mut doc = export(&train, &ExportOptions::default()).unwrap();
        doc.instructions[3].amplitude = 1.2;
        assert!(ScheduleDocument::parse(&doc.to_json().unwrap()).is_err());
    }

    #[test]
    fn negative_times_are_rejected() {
        let p = |c: f64| Subpulse { center: c, peak_rabi: 1.0, phase: 0.0 };
        let train = SubpulseTrain::new(1.0, 6.0, PulseShape::Gaussian, vec![p(-3.0), p(3.0)]).unwrap();
        assert!(export(&train, &ExportOptions::default()).is_err());
        let mut doc = export(&drio3_ns(), &ExportOptions::default()).unwrap();
        doc.instructions[0].t0_ns = -1.0;
        assert!(doc.validate().is_err());
    }

    #[test]
    fn misaligned_or_overlapping_instructions_are_rejected() {
        let mut doc = export(&drio3_ns(), &ExportOptions::default()).unwrap();
        doc.instructions[2].t0_ns += 0.1;
        assert!(doc.validate().is_err());
        let mut doc = export(&drio3_ns(), &ExportOptions::default()).unwrap();
        doc.instructions.swap(4, 5);
        assert!(doc.validate().is_err());
    }
}
