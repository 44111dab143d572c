//! Command-line front end. Files use ns and rad/ns throughout.
//!
//! Exit codes: 0 success, 2 validation failure, 3 numerical failure,
//! 64 usage error.

use std::ffi::OsString;
use std::f64::consts::{PI, SQRT_2};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::control::{
    load_waveform, rio_fifth_order, rio_third_order, ContinuousControl, ControlMeta, RioParams, WaveformFile,
    DEFAULT_WAVEFORM_SAMPLES, FIFTH_ORDER_AREA,
};
use crate::digitize::{
    digitize, taylor_phase_correction, validate_with_threshold, SubpulseTrain, DEFAULT_PULSES,
    DEFAULT_RWA_THRESHOLD, DEFAULT_TAU_OVER_SIGMA,
};
use crate::error::{Error, Result};
use crate::optimizer::{optimize_elliptic, optimize_with, DetuningAnsatz, OptimizerConfig};
use crate::propagate::{
    propagate_delta_train, propagate_effective, propagate_full, propagate_modes, ModeTruncation, ModelTag,
    QubitState,
};
use crate::robustness::{
    compare, default_grid, log_grid, merge_grids, pi_pulse_train, scan, summarize, uniform_grid,
    write_profiles_csv, ScanOptions, Subject,
};
use crate::schedule::{export, ExportOptions, ScheduleDocument, DEFAULT_DT_NS};

/// Width of each subpulse in the reference experiment, in ns.
pub const REFERENCE_SIGMA_NS: f64 = 3.0 * SQRT_2;

#[derive(Debug, Parser)]
#[command(name = "drio", version, about = "Robust two-level controls as digital Gaussian subpulse trains")]
pub struct Cli {
    /// JSON file presetting tolerances, grids and seeds; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a robust continuous waveform file.
    Synth(SynthArgs),
    /// Compile a waveform into a subpulse train and check its validity.
    Digitize(DigitizeArgs),
    /// Propagate a train or waveform and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Robustness profiles against amplitude errors.
    Scan(ScanArgs),
    /// Search a minimum-duration robust detuning.
    Optimize(OptimizeArgs),
    /// Emit a pulse schedule for a train.
    Export(ExportArgs),
    /// Check a train, waveform or schedule file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Robustness order, 3 or 5.
    #[arg(long)]
    pub order: u32,
    /// Rabi frequency in rad/ns.
    #[arg(long, conflicts_with = "duration")]
    pub rabi: Option<f64>,
    /// Pulse duration in ns.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Third order only: use the exactly robust member (T·Ω ≈ 1.8588π)
    /// instead of T·Ω = 1.86π.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DigitizeArgs {
    #[arg(long)]
    pub waveform: PathBuf,
    #[arg(long)]
    pub pulses: Option<usize>,
    #[arg(long)]
    pub tau_over_sigma: Option<f64>,
    /// Phase correction order, 0 or 1.
    #[arg(long, default_value_t = 0)]
    pub taylor_order: u32,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also write the validity report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "waveform", required_unless_present = "waveform")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    /// delta, full, effective or modes:K.
    #[arg(long, default_value = "delta")]
    pub model: String,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Trajectory CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// pi, drio3, drio5, rio3, rio5, train:PATH or waveform:PATH.
    #[arg(long = "subject", value_delimiter = ',')]
    pub subjects: Vec<String>,
    /// default, uniform:N, log:LO:HI:N or list:A;B;C; several joined by '+'.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "delta")]
    pub model: String,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Pulses for the built-in trains.
    #[arg(long)]
    pub pulses: Option<usize>,
    #[arg(long)]
    pub tau_over_sigma: Option<f64>,
    /// Fit window as LO,HI.
    #[arg(long, value_delimiter = ',')]
    pub fit_window: Option<Vec<f64>>,
    /// Long-format profile CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Wide CSV with one probability column per subject.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub order: u32,
    /// Rabi frequency in rad/ns of the written waveform.
    #[arg(long, default_value_t = 1.0)]
    pub rabi: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub coefficients: usize,
    /// Allow harmonics that are even about mid-pulse.
    #[arg(long)]
    pub no_symmetry: bool,
    /// Third order only: search the elliptic family instead.
    #[arg(long)]
    pub elliptic: bool,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dt_ns: Option<f64>,
    #[arg(long)]
    pub max_rabi: Option<f64>,
    #[arg(long, default_value = "d0")]
    pub channel: String,
    #[arg(long, default_value = "custom")]
    pub protocol_tag: String,
    #[arg(long)]
    pub order: Option<u32>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, required_unless_present_any = ["waveform", "schedule"])]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Minimum second-RWA margin.
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// Values a config file may preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub grid: Option<String>,
    pub pulses: Option<usize>,
    pub tau_over_sigma: Option<f64>,
    pub dt_ns: Option<f64>,
    pub rwa_threshold: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub samples: Option<usize>,
}

impl Config {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

const DEFAULT_TOLERANCE: f64 = 1e-10;
const DEFAULT_FIT_WINDOW: (f64, f64) = (0.1, 0.2);

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to `out` and `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    64
                }
            };
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::read(p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Synth(a) => synth(a, &config, out),
        Command::Digitize(a) => digitize_cmd(a, &config, out),
        Command::Simulate(a) => simulate(a, &config, out),
        Command::Scan(a) => scan_cmd(a, &config, out),
        Command::Optimize(a) => optimize_cmd(a, &config, out),
        Command::Export(a) => export_cmd(a, &config, out),
        Command::Validate(a) => validate_cmd(a, &config, out),
    }
}

fn sink(path: Option<&Path>, out: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => body(out),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_train(path: &Path) -> Result<SubpulseTrain> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// `Ω` in rad/ns with the figure conventionally quoted for it, which reads
/// the rad/ns value scaled by 10³ as MHz (so it is not `Ω/2π`).
pub fn describe_rabi(omega_rad_per_ns: f64) -> String {
    format!(
        "{omega_rad_per_ns:.4e} rad/ns (quoted as {:.1} MHz by the rad/µs convention; Ω/2π = {:.2} MHz)",
        omega_rad_per_ns * 1e3,
        omega_rad_per_ns * 1e3 / (2.0 * PI)
    )
}

fn area_for(order: u32, exact: bool) -> Result<f64> {
    match (order, exact) {
        (3, false) => Ok(RioParams::third_order().area_multiple),
        (3, true) => Ok(RioParams::third_order_exact().area_multiple),
        (5, false) => Ok(FIFTH_ORDER_AREA),
        (5, true) => Err(Error::InvalidInput("--exact applies to order 3 only".into())),
        (o, _) => Err(Error::InvalidInput(format!("order must be 3 or 5, got {o}"))),
    }
}

/// Preset control of the given order at Rabi frequency `rabi`.
pub fn preset(order: u32, rabi: f64, exact: bool) -> Result<ContinuousControl> {
    area_for(order, exact)?;
    match (order, exact) {
        (3, false) => rio_third_order(rabi),
        (3, true) => RioParams::third_order_exact().control(rabi),
        _ => rio_fifth_order(rabi),
    }
}

fn synth(a: &SynthArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let area = area_for(a.order, a.exact)?;
    let rabi = match (a.rabi, a.duration) {
        (Some(r), None) => r,
        (None, Some(t)) if t.is_finite() && t > 0.0 => area * PI / t,
        (None, Some(t)) => return Err(Error::InvalidInput(format!("duration must be positive, got {t}"))),
        _ => return Err(Error::Usage("give exactly one of --rabi or --duration".into())),
    };
    let control = preset(a.order, rabi, a.exact)?;
    let samples = a.samples.or(config.samples).unwrap_or(DEFAULT_WAVEFORM_SAMPLES);
    WaveformFile::from_control(&control, samples)?.write(&a.out)?;
    writeln!(out, "order {} : T = {:.4} ns, T·Ω/π = {:.6}", a.order, control.duration(), control.area_multiple())?;
    writeln!(out, "Ω = {}", describe_rabi(rabi))?;
    Ok(())
}

fn digitize_cmd(a: &DigitizeArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let control = load_waveform(&WaveformFile::read(&a.waveform)?)?;
    let n = a.pulses.or(config.pulses).unwrap_or(DEFAULT_PULSES);
    let ratio = a.tau_over_sigma.or(config.tau_over_sigma).unwrap_or(DEFAULT_TAU_OVER_SIGMA);
    let train = taylor_phase_correction(&digitize(&control, n, ratio)?, &control, a.taylor_order)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&train)? + "\n")?;
    let report = validate_with_threshold(&train, config.rwa_threshold.unwrap_or(DEFAULT_RWA_THRESHOLD));
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    writeln!(
        out,
        "N = {n}, τ = {:.4} ns, σ = {:.4} ns, total area = {:.6}π",
        train.tau(),
        train.sigma(),
        train.total_area() / PI
    )?;
    writeln!(out, "second-RWA margin {:.3} (threshold {}), {}", report.second_rwa_margin, report.threshold, if report.pass { "pass" } else { "FAIL" })?;
    for v in &report.violations {
        writeln!(out, "  {v}")?;
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let model: ModelTag = a.model.parse()?;
    let tol = a.tolerance.or(config.tolerance).unwrap_or(DEFAULT_TOLERANCE);
    let init = QubitState::ground();
    let traj = if let Some(p) = &a.train {
        let train = read_train(p)?;
        match model {
            ModelTag::Delta => propagate_delta_train(&train, init),
            ModelTag::Full => propagate_full(&train, init, tol)?,
            ModelTag::Effective => propagate_effective(&crate::digitize::effective_control(&train)?, init, tol)?,
            ModelTag::Modes(k) => propagate_modes(&train, ModeTruncation::for_train(&train, k), init, tol)?,
        }
    } else {
        let path = a.waveform.as_ref().ok_or_else(|| Error::Usage("give --train or --waveform".into()))?;
        if model != ModelTag::Effective {
            return Err(Error::Usage(format!("a waveform is propagated with --model effective, not {model}")));
        }
        propagate_effective(&load_waveform(&WaveformFile::read(path)?)?, init, tol)?
    };
    let final_transfer = traj.final_transfer();
    sink(a.out.as_deref(), out, |w| traj.write_csv(w))?;
    if a.out.is_some() {
        writeln!(out, "model {model}: final P₂ = {final_transfer:.12}, 1 − P₂ = {:.3e}", 1.0 - final_transfer)?;
    }
    Ok(())
}

/// Parses a grid specification; see [`ScanArgs::grid`].
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |s: &str| Error::Usage(format!("bad grid specification {s:?}"));
    let mut grids = Vec::new();
    for part in spec.split('+') {
        let fields: Vec<&str> = part.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(part));
        let grid = match fields.as_slice() {
            ["default"] => default_grid(),
            ["uniform", n] => uniform_grid(n.parse().map_err(|_| bad(part))?),
            ["log", lo, hi, n] => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if !(lo > 0.0 && hi > lo) {
                    return Err(bad(part));
                }
                log_grid(lo, hi, n.parse().map_err(|_| bad(part))?)
            }
            ["list", values] => values.split(';').map(num).collect::<Result<_>>()?,
            _ => return Err(bad(part)),
        };
        grids.push(grid);
    }
    Ok(merge_grids(&grids))
}

fn builtin_train(control: &ContinuousControl, n: usize, ratio: f64) -> Result<SubpulseTrain> {
    digitize(control, n, ratio)
}

fn scan_cmd(a: &ScanArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    if a.subjects.is_empty() {
        return Err(Error::Usage("give at least one --subject".into()));
    }
    let grid = parse_grid(a.grid.as_deref().or(config.grid.as_deref()).unwrap_or("default"))?;
    let model: ModelTag = a.model.parse()?;
    let tol = a.tolerance.or(config.tolerance).unwrap_or(DEFAULT_TOLERANCE);
    let n = a.pulses.or(config.pulses).unwrap_or(DEFAULT_PULSES);
    let ratio = a.tau_over_sigma.or(config.tau_over_sigma).unwrap_or(DEFAULT_TAU_OVER_SIGMA);
    let window = match &a.fit_window {
        Some(w) if w.len() == 2 && w[0] > 0.0 && w[1] > w[0] => (w[0], w[1]),
        Some(w) => return Err(Error::Usage(format!("--fit-window needs LO,HI with 0 < LO < HI, got {w:?}"))),
        None => config.fit_window.unwrap_or(DEFAULT_FIT_WINDOW),
    };
    let duration = n as f64 * ratio * REFERENCE_SIGMA_NS;
    let tau = duration / n as f64;

    let mut profiles = Vec::new();
    for s in &a.subjects {
        let (tag, subject) = match s.as_str() {
            "pi" => ("pi_pulse".to_string(), Subject::Train(pi_pulse_train(n, tau, ratio)?)),
            "drio3" => ("drio3".into(), Subject::Train(builtin_train(&rio_third_order(1.86 * PI / duration)?, n, ratio)?)),
            "drio5" => ("drio5".into(), Subject::Train(builtin_train(&rio_fifth_order(FIFTH_ORDER_AREA * PI / duration)?, n, ratio)?)),
            "rio3" => ("rio3".into(), Subject::Control(rio_third_order(1.86 * PI / duration)?)),
            "rio5" => ("rio5".into(), Subject::Control(rio_fifth_order(FIFTH_ORDER_AREA * PI / duration)?)),
            other => {
                if let Some(p) = other.strip_prefix("train:") {
                    (file_tag(p), Subject::Train(read_train(Path::new(p))?))
                } else if let Some(p) = other.strip_prefix("waveform:") {
                    (file_tag(p), Subject::Control(load_waveform(&WaveformFile::read(p)?)?))
                } else {
                    return Err(Error::Usage(format!("unknown subject {other:?}")));
                }
            }
        };
        let subject_model = match (&subject, model) {
            (Subject::Control(_), ModelTag::Delta) => ModelTag::Effective,
            _ => model,
        };
        let opts = ScanOptions { model: subject_model, tolerance: tol, ..Default::default() };
        profiles.push(scan(&subject, &grid, &tag, &opts)?);
    }
    sink(a.out.as_deref(), out, |w| write_profiles_csv(&profiles, w))?;
    let summary = summarize(&profiles, window)?;
    if let Some(p) = &a.summary {
        write_json(p, &summary)?;
    }
    if let Some(p) = &a.table {
        let c = compare(&profiles)?;
        c.write_csv(BufWriter::new(File::create(p)?))?;
    }
    if a.out.is_some() {
        for s in &summary.protocols {
            let exponent = s.fit.map_or("n/a".to_string(), |f| format!("{:.3}", f.exponent));
            writeln!(
                out,
                "{:<10} exponent {exponent:>7}  plateau [{:+.4}, {:+.4}]  1 − P(0) = {:.2e}",
                s.protocol_tag,
                s.plateau.lower,
                s.plateau.upper,
                s.infidelity_at_zero.unwrap_or(f64::NAN)
            )?;
        }
    }
    Ok(())
}

fn file_tag(path: &str) -> String {
    Path::new(path).file_stem().map_or_else(|| "custom".into(), |s| s.to_string_lossy().into_owned())
}

fn optimize_cmd(a: &OptimizeArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let seed = a.seed.or(config.seed).unwrap_or(1);
    let mut cfg = OptimizerConfig::default();
    if let Some(s) = a.starts.or(config.starts) {
        cfg.starts = s;
    }
    if a.elliptic {
        if a.order != 3 {
            return Err(Error::InvalidInput("the elliptic family is searched at order 3 only".into()));
        }
        let fit = optimize_elliptic(seed, &cfg)?;
        let m = crate::specfun::EllipticModulus::new(fit.m)?;
        let params = RioParams { m, omega_over_rabi: fit.omega_over_rabi, delta0_over_rabi: fit.delta0_over_rabi, area_multiple: fit.area_multiple };
        let control = params.control(a.rabi)?.with_meta(ControlMeta { order: Some(3), source: "optimizer:elliptic".into() });
        WaveformFile::from_control(&control, config.samples.unwrap_or(DEFAULT_WAVEFORM_SAMPLES))?.write(&a.out)?;
        if let Some(p) = &a.report {
            write_json(p, &fit)?;
        }
        writeln!(
            out,
            "m = {:.4}, ω/Ω = {:.4}, Δ₀/Ω = {:.4}, T·Ω/π = {:.5}",
            fit.m, fit.omega_over_rabi, fit.delta0_over_rabi, fit.area_multiple
        )?;
        return Ok(());
    }
    let ansatz = DetuningAnsatz { antisymmetric: !a.no_symmetry, ..DetuningAnsatz::new(a.coefficients) };
    let (control, report) = optimize_with(a.order, a.rabi, &ansatz, seed, &cfg)?;
    WaveformFile::from_control(&control, config.samples.unwrap_or(DEFAULT_WAVEFORM_SAMPLES))?.write(&a.out)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    writeln!(
        out,
        "order {}: T·Ω/π = {:.5}, max |residual| = {:.2e}, 1 − P = {:.2e}, {} starts, {:.1} s, {}",
        report.order,
        report.t_times_omega_over_pi,
        report.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs())),
        report.transfer_infidelity,
        report.seeds_tried,
        report.wall_time,
        if report.accepted { "accepted" } else { "NOT accepted" }
    )?;
    if report.accepted {
        Ok(())
    } else {
        Err(Error::Infeasible("the best control does not meet the robustness constraints".into()))
    }
}

fn export_cmd(a: &ExportArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    let train = read_train(&a.train)?;
    let opts = ExportOptions {
        dt_ns: a.dt_ns.or(config.dt_ns).unwrap_or(DEFAULT_DT_NS),
        max_rabi_rad_per_ns: a.max_rabi,
        channel: a.channel.clone(),
        protocol_tag: a.protocol_tag.clone(),
        order: a.order,
    };
    let doc = export(&train, &opts)?;
    doc.write(&a.out)?;
    writeln!(out, "{} instructions, dt = {:.6} ns, total {:.3} ns", doc.instructions.len(), doc.dt_ns, doc.metadata.total_duration_ns)?;
    Ok(())
}

fn validate_cmd(a: &ValidateArgs, config: &Config, out: &mut dyn Write) -> Result<()> {
    if let Some(p) = &a.train {
        let train = read_train(p)?;
        let report = validate_with_threshold(&train, a.threshold.or(config.rwa_threshold).unwrap_or(DEFAULT_RWA_THRESHOLD));
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        if !report.pass {
            return Err(Error::Validation(report.violations.join("; ")));
        }
    }
    if let Some(p) = &a.waveform {
        let control = load_waveform(&WaveformFile::read(p)?)?;
        writeln!(out, "waveform ok: T = {:.4} ns, T·Ω/π = {:.6}", control.duration(), control.area_multiple())?;
    }
    if let Some(p) = &a.schedule {
        let doc = ScheduleDocument::read(p)?;
        writeln!(out, "schedule ok: {} instructions", doc.instructions.len())?;
    }
    Ok(())
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let (stdout, stderr) = (io::stdout(), io::stderr());
    main_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
