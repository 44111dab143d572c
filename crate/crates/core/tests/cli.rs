use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use drio::cli::main_with;
use drio::control::WaveformFile;
use drio::digitize::SubpulseTrain;
use drio::schedule::ScheduleDocument;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn drio(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(std::iter::once("drio").chain(args.iter().copied()), &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesises and digitises the third-order control at the reference
/// duration; returns the waveform and train paths.
fn reference_train(dir: &TempDir) -> (PathBuf, PathBuf) {
    let (w, t) = (path(dir, "w3.json"), path(dir, "t3.json"));
    assert_eq!(drio(&["synth", "--order", "3", "--duration", "381.838", "-o", s(&w)]).code, 0);
    assert_eq!(drio(&["digitize", "--waveform", s(&w), "-o", s(&t)]).code, 0);
    (w, t)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(drio(&["--help"]).code, 0);
    assert_eq!(drio(&["--version"]).code, 0);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(drio(&[]).code, 64);
    assert_eq!(drio(&["frobnicate"]).code, 64);
    assert_eq!(drio(&["synth", "--order", "3", "--rabi", "1", "--duration", "3", "-o", "x"]).code, 64);
    let r = drio(&["synth", "--order", "3", "-o", "x"]);
    assert_eq!(r.code, 64, "{}", r.err);
    assert_eq!(drio(&["scan"]).code, 64);
    assert_eq!(drio(&["scan", "--subject", "nonsense"]).code, 64);
    assert_eq!(drio(&["scan", "--subject", "pi", "--grid", "log:0:1:3"]).code, 64);
}

#[test]
fn synth_writes_the_reference_waveform() {
    let dir = TempDir::new().unwrap();
    let (w, _) = reference_train(&dir);
    let file = WaveformFile::read(&w).unwrap();
    assert!((file.duration - 381.838).abs() < 1e-9);
    assert!((file.rabi_amplitude * file.duration / PI - 1.86).abs() < 1e-12);
    assert_eq!(file.time_grid.len(), file.detuning.len());

    let r = drio(&["synth", "--order", "5", "--duration", "381.838", "-o", s(&path(&dir, "w5.json"))]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("22.3 MHz"), "{}", r.out);
}

#[test]
fn invalid_values_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "x.json");
    assert_eq!(drio(&["synth", "--order", "4", "--rabi", "1", "-o", s(&out)]).code, 2);
    assert_eq!(drio(&["synth", "--order", "5", "--exact", "--rabi", "1", "-o", s(&out)]).code, 2);
    assert_eq!(drio(&["synth", "--order", "3", "--duration=-1", "-o", s(&out)]).code, 2);
    assert_eq!(drio(&["optimize", "--order", "5", "--elliptic", "-o", s(&out)]).code, 2);
    assert_eq!(drio(&["simulate", "--train", s(&path(&dir, "missing.json"))]).code, 2);
}

#[test]
fn digitize_reports_validity() {
    let dir = TempDir::new().unwrap();
    let w = path(&dir, "w.json");
    assert_eq!(drio(&["synth", "--order", "3", "--rabi", "0.0153", "-o", s(&w)]).code, 0);
    let (t, report) = (path(&dir, "t.json"), path(&dir, "r.json"));
    let r = drio(&["digitize", "--waveform", s(&w), "--pulses", "21", "--tau-over-sigma", "8", "-o", s(&t), "--report", s(&report)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let train: SubpulseTrain = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(train.len(), 21);
    assert!((train.tau() / train.sigma() - 8.0).abs() < 1e-12);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn config_file_presets_and_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let (w, _) = reference_train(&dir);
    let cfg = path(&dir, "cfg.json");
    std::fs::write(&cfg, r#"{"pulses": 9, "tau_over_sigma": 5.0}"#).unwrap();
    let t = path(&dir, "t9.json");
    assert_eq!(drio(&["--config", s(&cfg), "digitize", "--waveform", s(&w), "-o", s(&t)]).code, 0);
    let train: SubpulseTrain = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(train.len(), 9);

    // Flags take precedence over the file.
    assert_eq!(drio(&["--config", s(&cfg), "digitize", "--waveform", s(&w), "--pulses", "11", "-o", s(&t)]).code, 0);
    let train: SubpulseTrain = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(train.len(), 11);

    std::fs::write(&cfg, r#"{"pulsez": 9}"#).unwrap();
    assert_eq!(drio(&["--config", s(&cfg), "digitize", "--waveform", s(&w), "-o", s(&t)]).code, 2);
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = TempDir::new().unwrap();
    let (w, t) = reference_train(&dir);
    let csv = path(&dir, "traj.csv");
    let r = drio(&["simulate", "--train", s(&t), "--model", "full", "-o", s(&csv)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "time_ns,pop_1,pop_2,re_c1,im_c1,re_c2,im_c2,model_tag");
    assert_eq!(lines.count(), 16);

    let r = drio(&["simulate", "--train", s(&t), "--model", "modes:3"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.lines().last().unwrap().ends_with("modes:3"), "{}", r.out);

    assert_eq!(drio(&["simulate", "--waveform", s(&w), "--model", "effective"]).code, 0);
    assert_eq!(drio(&["simulate", "--waveform", s(&w), "--model", "delta"]).code, 64);
    assert_eq!(drio(&["simulate", "--train", s(&t), "--tolerance", "1e-3"]).code, 0);
    assert_eq!(drio(&["simulate", "--train", s(&t), "--model", "full", "--tolerance", "1e-3"]).code, 2);
}

#[test]
fn scan_writes_profiles_and_summary() {
    let dir = TempDir::new().unwrap();
    let (_, t) = reference_train(&dir);
    let (csv, summary, table) = (path(&dir, "p.csv"), path(&dir, "s.json"), path(&dir, "tab.csv"));
    let subjects = format!("pi,drio3,train:{}", s(&t));
    let r = drio(&[
        "scan", "--subject", &subjects, "--grid", "list:-0.1;0;0.1+log:0.01:0.2:12", "-o", s(&csv),
        "--summary", s(&summary), "--table", s(&table), "--fit-window", "0.01,0.2",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "alpha,probability,protocol_tag,model_tag");
    assert_eq!(text.lines().count(), 1 + 3 * 27);
    assert!(text.contains(",t3,delta"));

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let protocols = summary["protocols"].as_array().unwrap();
    assert_eq!(protocols.len(), 3);
    let pi_exponent = protocols[0]["fit"]["exponent"].as_f64().unwrap();
    assert!((pi_exponent - 2.0).abs() < 0.1, "{pi_exponent}");

    let table = std::fs::read_to_string(&table).unwrap();
    assert!(table.lines().next().unwrap().starts_with("alpha,"));
    assert_eq!(table.lines().count(), 1 + 27);
}

#[test]
fn export_then_validate_round_trip() {
    let dir = TempDir::new().unwrap();
    let (w, t) = reference_train(&dir);
    let sched = path(&dir, "sched.json");
    let r = drio(&["export", "--train", s(&t), "--protocol-tag", "drio3", "--order", "3", "-o", s(&sched)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc = ScheduleDocument::read(&sched).unwrap();
    assert_eq!(doc.instructions.len(), 15);
    assert_eq!(doc.metadata.order, Some(3));
    assert_eq!(drio(&["validate", "--schedule", s(&sched), "--train", s(&t), "--waveform", s(&w)]).code, 0);

    // A declared maximum below the train's peak cannot be represented.
    assert_eq!(drio(&["export", "--train", s(&t), "--max-rabi", "0.01", "-o", s(&sched)]).code, 2);

    let mut doc = doc;
    doc.instructions[3].t0_ns += 0.1;
    doc.write(&sched).unwrap();
    assert_eq!(drio(&["validate", "--schedule", s(&sched)]).code, 2);
}

#[test]
fn validate_flags_a_train_outside_the_second_rwa() {
    let dir = TempDir::new().unwrap();
    let peak = 2.0 * PI / PI.sqrt();
    let pulses: Vec<String> = (0..15)
        .map(|n| format!(r#"{{"t_ns": {}, "omega_rad_per_ns": {peak}, "phase_rad": {n}}}"#, 3.0 + 6.0 * n as f64))
        .collect();
    let t = path(&dir, "strong.json");
    std::fs::write(&t, format!(r#"{{"sigma_ns": 1.0, "tau_ns": 6.0, "pulses": [{}]}}"#, pulses.join(","))).unwrap();
    let r = drio(&["validate", "--train", s(&t)]);
    assert_eq!(r.code, 2, "{}", r.out);
    assert!(r.err.contains("validation"), "{}", r.err);
    assert_eq!(drio(&["validate", "--train", s(&t), "--threshold", "0.5"]).code, 0);

    std::fs::write(&t, r#"{"sigma_ns": 1.0, "tau_ns": 2.0, "pulses": []}"#).unwrap();
    assert_eq!(drio(&["validate", "--train", s(&t)]).code, 2);
}
