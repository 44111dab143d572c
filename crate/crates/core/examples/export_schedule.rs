//! Writes the third-order train as a pulse schedule on a 2/9 ns grid, reads
//! it back and compares the simulated transfer.

use std::f64::consts::PI;

use drio::control::rio_third_order;
use drio::digitize::digitize;
use drio::propagate::{propagate_full, QubitState};
use drio::schedule::{export, ExportOptions, ScheduleDocument};

fn main() -> drio::Result<()> {
    let train = digitize(&rio_third_order(1.86 * PI / 381.84)?, 15, 6.0)?;
    let options = ExportOptions { protocol_tag: "drio3".into(), order: Some(3), ..Default::default() };
    let doc = export(&train, &options)?;
    let json = doc.to_json()?;
    println!("{}", json.lines().take(14).collect::<Vec<_>>().join("\n"));
    println!("  ...");

    let back = ScheduleDocument::parse(&json)?.to_train()?;
    let init = QubitState::ground();
    let before = propagate_full(&train, init, 1e-10)?.final_transfer();
    let after = propagate_full(&back, init, 1e-10)?.final_transfer();
    println!("P before {before:.10}, after round trip {after:.10}, |ΔP| = {:.1e}", (before - after).abs());
    Ok(())
}
