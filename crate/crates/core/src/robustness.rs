//! Transfer probability as a function of a relative amplitude error α
//! (`Ω → Ω(1 + α)`), the small-α scaling exponent of the infidelity, and
//! side-by-side comparison of several protocols.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ContinuousControl;
use crate::digitize::{effective_control, PulseShape, Subpulse, SubpulseTrain};
use crate::error::{Error, Result};
use crate::propagate::{
    propagate_delta_train, propagate_effective, propagate_full, propagate_modes, ModeTruncation, ModelTag,
    QubitState,
};

/// What is being scanned.
#[derive(Debug, Clone)]
pub enum Subject {
    Train(SubpulseTrain),
    Control(ContinuousControl),
}

/// How α perturbs the subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inhomogeneity {
    /// Every Rabi frequency scaled by `1 + α`.
    #[default]
    Amplitude,
    /// Every subpulse width scaled by `1 + α` (trains only). Areas scale as
    /// for `Amplitude`; pulse overlap changes as well.
    Width,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub model: ModelTag,
    /// ODE tolerance for the non-delta models.
    pub tolerance: f64,
    pub inhomogeneity: Inhomogeneity,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { model: ModelTag::Delta, tolerance: 1e-10, inhomogeneity: Inhomogeneity::Amplitude }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProfile {
    pub alphas: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub protocol_tag: String,
    pub model_tag: String,
}

/// `points` values of α equally spaced on `[−1, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| -1.0 + 2.0 * k as f64 / (points - 1) as f64).collect(),
    }
}

/// `±` log-spaced values on `[lo, hi]`, `points` per sign.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let a = if points == 1 { lo } else { lo * (hi / lo).powf(k as f64 / (points - 1) as f64) };
        out.push(a);
        out.push(-a);
    }
    out
}

/// Sorted union of grids; values closer than 1e-12 are merged.
pub fn merge_grids(grids: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = grids.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    all
}

pub const DEFAULT_UNIFORM_POINTS: usize = 81;
pub const DEFAULT_LOG_POINTS: usize = 25;

/// 81 points on `[−1, 1]` plus 25 log-spaced points per sign on `[1e-3, 0.2]`.
pub fn default_grid() -> Vec<f64> {
    merge_grids(&[uniform_grid(DEFAULT_UNIFORM_POINTS), log_grid(1e-3, 0.2, DEFAULT_LOG_POINTS)])
}

/// `n` equal constant-phase Gaussian subpulses with total area π, spaced by
/// `tau` with `σ = tau / tau_over_sigma`.
pub fn pi_pulse_train(n: usize, tau: f64, tau_over_sigma: f64) -> Result<SubpulseTrain> {
    if n == 0 {
        return Err(Error::InvalidInput("a π-pulse train needs at least one subpulse".into()));
    }
    let sigma = tau / tau_over_sigma;
    let peak = PI / n as f64 / (PI.sqrt() * sigma);
    let pulses = (0..n).map(|k| Subpulse { center: (k as f64 + 0.5) * tau, peak_rabi: peak, phase: 0.0 }).collect();
    SubpulseTrain::new(sigma, tau, PulseShape::Gaussian, pulses)
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("empty α grid".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && (-1.0..=1.0).contains(*a))) {
        return Err(Error::InvalidInput(format!("α = {a} outside [−1, 1]")));
    }
    Ok(())
}

fn transfer(subject: &Subject, alpha: f64, options: &ScanOptions) -> Result<f64> {
    let factor = 1.0 + alpha;
    let initial = QubitState::ground();
    let traj = match subject {
        Subject::Train(train) => {
            let train = match options.inhomogeneity {
                Inhomogeneity::Amplitude => train.with_amplitude_scale(factor),
                Inhomogeneity::Width => train.with_width_scale(factor),
            };
            match options.model {
                ModelTag::Delta => propagate_delta_train(&train, initial),
                ModelTag::Full => propagate_full(&train, initial, options.tolerance)?,
                ModelTag::Effective => propagate_effective(&effective_control(&train)?, initial, options.tolerance)?,
                ModelTag::Modes(k) => {
                    propagate_modes(&train, ModeTruncation::for_train(&train, k), initial, options.tolerance)?
                }
            }
        }
        Subject::Control(control) => {
            if options.inhomogeneity != Inhomogeneity::Amplitude {
                return Err(Error::InvalidInput("width inhomogeneity applies to subpulse trains only".into()));
            }
            if options.model != ModelTag::Effective {
                return Err(Error::InvalidInput(format!(
                    "a continuous control can only be propagated with the effective model, not {}",
                    options.model
                )));
            }
            propagate_effective(&control.with_amplitude_scale(factor), initial, options.tolerance)?
        }
    };
    Ok(traj.final_transfer().clamp(0.0, 1.0))
}

/// Final `|c₂|²` from `|1⟩` at every α. Grid points are evaluated in
/// parallel; the result does not depend on scheduling.
pub fn scan(subject: &Subject, alphas: &[f64], protocol_tag: &str, options: &ScanOptions) -> Result<RobustnessProfile> {
    check_grid(alphas)?;
    let probabilities = alphas
        .par_iter()
        .map(|&alpha| transfer(subject, alpha, options).map_err(|e| Error::AtAlpha { alpha, source: Box::new(e) }))
        .collect::<Result<Vec<f64>>>()?;
    Ok(RobustnessProfile {
        alphas: alphas.to_vec(),
        probabilities,
        protocol_tag: protocol_tag.to_string(),
        model_tag: options.model.to_string(),
    })
}

impl RobustnessProfile {
    pub fn infidelity_at(&self, alpha: f64) -> Option<f64> {
        self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12).map(|k| 1.0 - self.probabilities[k])
    }

    /// Largest `|P(α) − P(−α)|` over grid points present with both signs.
    pub fn asymmetry(&self) -> f64 {
        self.alphas
            .iter()
            .zip(&self.probabilities)
            .filter(|(a, _)| **a > 0.0)
            .filter_map(|(&a, p)| self.infidelity_at(-a).map(|q| (1.0 - q - p).abs()))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_profiles_csv(std::slice::from_ref(self), writer)
    }
}

/// Profiles stacked in long format with header
/// `alpha,probability,protocol_tag,model_tag`.
pub fn write_profiles_csv<W: Write>(profiles: &[RobustnessProfile], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["alpha", "probability", "protocol_tag", "model_tag"])?;
    for p in profiles {
        for (a, prob) in p.alphas.iter().zip(&p.probabilities) {
            w.write_record([format!("{a:.12e}"), format!("{prob:.15e}"), p.protocol_tag.clone(), p.model_tag.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Infidelities below this are indistinguishable from rounding.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Fits whose RMS log residual exceeds this are reported as not valid.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of `ln(1 − P)` against `ln α`.
    pub exponent: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
    /// Some points in the window were dropped for being below the noise floor.
    pub floor_limited: bool,
    pub valid: bool,
}

/// Least-squares slope of `ln(1 − P)` against `ln α` over grid points with
/// `α` in `window`, averaging the infidelity at `±α` when both are present.
pub fn fit_order(profile: &RobustnessProfile, window: (f64, f64)) -> Result<ScalingFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi <= 0.2 + 1e-12 && lo < hi) {
        return Err(Error::InvalidInput(format!("fit window must satisfy 0 < lo < hi ≤ 0.2, got ({lo}, {hi})")));
    }
    let samples: Vec<(f64, f64)> = profile
        .alphas
        .iter()
        .zip(&profile.probabilities)
        .filter(|(a, _)| **a >= lo - 1e-12 && **a <= hi + 1e-12)
        .map(|(&a, p)| {
            let plus = 1.0 - p;
            (a, profile.infidelity_at(-a).map_or(plus, |minus| 0.5 * (plus + minus)))
        })
        .collect();
    if samples.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "fit window ({lo}, {hi}) holds {} grid points, need at least 5",
            samples.len()
        )));
    }
    let usable: Vec<(f64, f64)> =
        samples.iter().filter(|(_, q)| *q >= NOISE_FLOOR).map(|&(a, q)| (a.ln(), q.ln())).collect();
    let floor_limited = usable.len() < samples.len();
    if usable.len() < 2 {
        return Err(Error::Numerical(format!("infidelity is at the noise floor across the window ({lo}, {hi})")));
    }
    let n = usable.len() as f64;
    let (mx, my) = usable.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let residual = (usable.iter().map(|(x, y)| (y - my - exponent * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ScalingFit {
        exponent,
        window,
        residual,
        points: usable.len(),
        floor_limited,
        valid: exponent > 0.0 && residual <= FIT_RESIDUAL_THRESHOLD && !floor_limited,
    })
}

/// Interval around α = 0 on which `1 − P ≤ threshold`, with edges linearly
/// interpolated between grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub protocol_tag: String,
    pub lower: f64,
    pub upper: f64,
}

impl Plateau {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Smaller of the two one-sided extents.
    pub fn half_width(&self) -> f64 {
        self.upper.min(-self.lower)
    }
}

pub const PLATEAU_THRESHOLD: f64 = 1e-2;

pub fn plateau(profile: &RobustnessProfile, threshold: f64) -> Result<Plateau> {
    let zero = profile
        .alphas
        .iter()
        .position(|a| a.abs() < 1e-12)
        .ok_or_else(|| Error::InvalidInput("plateau needs α = 0 on the grid".into()))?;
    let infid = |k: usize| 1.0 - profile.probabilities[k];
    if infid(zero) > threshold {
        return Ok(Plateau { protocol_tag: profile.protocol_tag.clone(), lower: 0.0, upper: 0.0 });
    }
    let edge = |step: isize| -> f64 {
        let mut k = zero as isize;
        loop {
            let next = k + step;
            if next < 0 || next as usize >= profile.alphas.len() {
                return profile.alphas[k as usize];
            }
            let (a0, a1) = (profile.alphas[k as usize], profile.alphas[next as usize]);
            let (q0, q1) = (infid(k as usize), infid(next as usize));
            if q1 > threshold {
                return a0 + (a1 - a0) * (threshold - q0) / (q1 - q0);
            }
            k = next;
        }
    };
    Ok(Plateau { protocol_tag: profile.protocol_tag.clone(), lower: edge(-1), upper: edge(1) })
}

/// Profiles on a shared grid with their plateaus.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub alphas: Vec<f64>,
    pub protocols: Vec<String>,
    /// `rows[i][j]`: probability of protocol `j` at `alphas[i]`.
    pub rows: Vec<Vec<f64>>,
    pub plateaus: Vec<Plateau>,
}

pub fn compare(profiles: &[RobustnessProfile]) -> Result<Comparison> {
    let first = profiles.first().ok_or_else(|| Error::InvalidInput("nothing to compare".into()))?;
    for p in profiles {
        let same = p.alphas.len() == first.alphas.len()
            && p.alphas.iter().zip(&first.alphas).all(|(a, b)| (a - b).abs() < 1e-12);
        if !same {
            return Err(Error::InvalidInput(format!("profile {} is on a different α grid", p.protocol_tag)));
        }
    }
    let rows = (0..first.alphas.len()).map(|i| profiles.iter().map(|p| p.probabilities[i]).collect()).collect();
    Ok(Comparison {
        alphas: first.alphas.clone(),
        protocols: profiles.iter().map(|p| p.protocol_tag.clone()).collect(),
        rows,
        plateaus: profiles.iter().map(|p| plateau(p, PLATEAU_THRESHOLD)).collect::<Result<_>>()?,
    })
}

impl Comparison {
    /// Wide CSV: `alpha` followed by one probability column per protocol.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["alpha".to_string()];
        header.extend(self.protocols.iter().cloned());
        w.write_record(&header)?;
        for (a, row) in self.alphas.iter().zip(&self.rows) {
            let mut rec = vec![format!("{a:.12e}")];
            rec.extend(row.iter().map(|p| format!("{p:.15e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-protocol entry of the scan summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol_tag: String,
    pub model_tag: String,
    pub fit: Option<ScalingFit>,
    /// Why no fit is reported, when `fit` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub plateau: Plateau,
    pub infidelity_at_zero: Option<f64>,
    pub asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub fit_window: (f64, f64),
    pub plateau_threshold: f64,
    pub protocols: Vec<ProtocolSummary>,
}

pub fn summarize(profiles: &[RobustnessProfile], fit_window: (f64, f64)) -> Result<ScanSummary> {
    let protocols = profiles
        .iter()
        .map(|p| {
            let (fit, fit_error) = match fit_order(p, fit_window) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(ProtocolSummary {
                protocol_tag: p.protocol_tag.clone(),
                model_tag: p.model_tag.clone(),
                fit,
                fit_error,
                plateau: plateau(p, PLATEAU_THRESHOLD)?,
                infidelity_at_zero: p.infidelity_at(0.0),
                asymmetry: p.asymmetry(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScanSummary { fit_window, plateau_threshold: PLATEAU_THRESHOLD, protocols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::rio_third_order;
    use crate::digitize::digitize;
    use proptest::prelude::*;

    fn pi_profile(grid: &[f64]) -> RobustnessProfile {
        let train = pi_pulse_train(15, 6.0, 6.0).unwrap();
        scan(&Subject::Train(train), grid, "pi_pulse", &ScanOptions::default()).unwrap()
    }

    #[test]
    fn default_grid_layout() {
        let g = default_grid();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.first(), Some(&-1.0));
        assert_eq!(g.last(), Some(&1.0));
        assert!(g.contains(&0.0));
        assert!(g.iter().any(|a| (a - 1e-3).abs() < 1e-15));
        assert!(g.iter().any(|a| (a + 0.2).abs() < 1e-12));
    }

    #[test]
    fn pi_pulse_scan_is_analytic() {
        let p = pi_profile(&default_grid());
        for (a, prob) in p.alphas.iter().zip(&p.probabilities) {
            let exact = (PI * a / 2.0).cos().powi(2);
            assert!((prob - exact).abs() < 1e-10, "α={a}");
        }
        let at = p.alphas.iter().position(|a| (a - 0.1).abs() < 1e-12).unwrap();
        assert!((p.probabilities[at] - 0.97553).abs() < 1e-5);
        assert!(p.asymmetry() < 1e-14);
    }

    #[test]
    fn pi_pulse_fit_and_plateau() {
        let p = pi_profile(&default_grid());
        let fit = fit_order(&p, (1e-3, 0.05)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.05 && fit.valid, "{fit:?}");
        let plateau = plateau(&p, 1e-2).unwrap();
        let exact = 2.0 / PI * 0.1_f64.asin();
        assert!((plateau.upper - exact).abs() < 2e-3 && (plateau.lower + exact).abs() < 2e-3, "{plateau:?}");
    }

    #[test]
    fn grid_outside_unit_interval_is_rejected() {
        let train = pi_pulse_train(5, 6.0, 6.0).unwrap();
        let s = Subject::Train(train);
        assert!(scan(&s, &[0.0, 1.5], "x", &ScanOptions::default()).is_err());
        assert!(scan(&s, &[], "x", &ScanOptions::default()).is_err());
    }

    #[test]
    fn fit_rejects_bad_windows_and_reports_floor() {
        let p = pi_profile(&default_grid());
        assert!(fit_order(&p, (0.0, 0.1)).is_err());
        assert!(fit_order(&p, (0.1, 0.3)).is_err());
        assert!(fit_order(&p, (0.1, 0.101)).is_err());
        let flat = RobustnessProfile {
            alphas: (1..=6).map(|k| k as f64 * 0.01).collect(),
            probabilities: vec![1.0; 6],
            protocol_tag: "flat".into(),
            model_tag: "delta".into(),
        };
        assert!(matches!(fit_order(&flat, (0.01, 0.06)), Err(Error::Numerical(_))));
    }

    #[test]
    fn continuous_control_requires_effective_model() {
        let c = rio_third_order(1.0).unwrap();
        assert!(scan(&Subject::Control(c.clone()), &[0.0], "rio3", &ScanOptions::default()).is_err());
        let opts = ScanOptions { model: ModelTag::Effective, ..Default::default() };
        let p = scan(&Subject::Control(c), &[0.0, 0.05], "rio3", &opts).unwrap();
        assert!(1.0 - p.probabilities[0] < 1e-8);
    }

    #[test]
    fn width_and_amplitude_agree_for_delta_model() {
        let train = digitize(&rio_third_order(1.0).unwrap(), 15, 6.0).unwrap();
        let grid = [-0.1, 0.0, 0.07];
        let a = scan(&Subject::Train(train.clone()), &grid, "drio3", &ScanOptions::default()).unwrap();
        let w_opts = ScanOptions { inhomogeneity: Inhomogeneity::Width, ..Default::default() };
        let w = scan(&Subject::Train(train), &grid, "drio3", &w_opts).unwrap();
        for (x, y) in a.probabilities.iter().zip(&w.probabilities) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn compare_requires_shared_grid() {
        let p = pi_profile(&[-0.1, 0.0, 0.1]);
        let mut q = p.clone();
        q.alphas[0] = -0.2;
        assert!(compare(&[p.clone(), q]).is_err());
        let c = compare(&[p.clone(), p]).unwrap();
        assert_eq!(c.rows.len(), 3);
        assert_eq!(c.rows[1].len(), 2);
    }

    #[test]
    fn profile_csv_layout() {
        let p = pi_profile(&[0.0, 0.5]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("alpha,probability,protocol_tag,model_tag"));
        assert!(lines.next().unwrap().ends_with(",pi_pulse,delta"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scan_is_independent_of_grid_order(mut grid in proptest::collection::vec(-1.0..1.0_f64, 1..12)) {
            let train = digitize(&rio_third_order(1.0).unwrap(), 9, 6.0).unwrap();
            let s = Subject::Train(train);
            let forward = scan(&s, &grid, "t", &ScanOptions::default()).unwrap();
            grid.reverse();
            let backward = scan(&s, &grid, "t", &ScanOptions::default()).unwrap();
            let n = grid.len();
            for k in 0..n {
                prop_assert_eq!(forward.probabilities[k].to_bits(), backward.probabilities[n - 1 - k].to_bits());
            }
        }

        #[test]
        fn probabilities_are_in_unit_interval(alpha in -1.0..1.0_f64) {
            let train = digitize(&rio_third_order(1.0).unwrap(), 15, 6.0).unwrap();
            let p = scan(&Subject::Train(train), &[alpha], "t", &ScanOptions::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.probabilities[0]));
        }
    }
}
