//! Amplitude-error profiles of the π-pulse and the digital third- and
//! fifth-order trains. Pass a path to also write the long-format CSV.

use std::f64::consts::PI;
use std::fs::File;

use drio::control::{rio_fifth_order, rio_third_order, FIFTH_ORDER_AREA};
use drio::digitize::digitize;
use drio::robustness::{default_grid, pi_pulse_train, scan, summarize, write_profiles_csv, ScanOptions, Subject};

fn main() -> drio::Result<()> {
    let duration = 381.84;
    let grid = default_grid();
    let opts = ScanOptions::default();
    let subjects = [
        ("pi_pulse", pi_pulse_train(15, duration / 15.0, 6.0)?),
        ("drio3", digitize(&rio_third_order(1.86 * PI / duration)?, 15, 6.0)?),
        ("drio5", digitize(&rio_fifth_order(FIFTH_ORDER_AREA * PI / duration)?, 15, 6.0)?),
    ];
    let profiles = subjects
        .into_iter()
        .map(|(tag, train)| scan(&Subject::Train(train), &grid, tag, &opts))
        .collect::<drio::Result<Vec<_>>>()?;

    println!("    α      π-pulse    drio3      drio5");
    for &a in &[-0.3, -0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2, 0.3] {
        let row: Vec<String> = profiles.iter().map(|p| format!("{:.2e}", p.infidelity_at(a).unwrap())).collect();
        println!("{a:+6.2}  {}", row.join("   "));
    }
    for s in summarize(&profiles, (0.1, 0.2))?.protocols {
        println!(
            "{:9} exponent {:.2}, 1 − P ≤ 1e-2 on [{:+.3}, {:+.3}]",
            s.protocol_tag,
            s.fit.map_or(f64::NAN, |f| f.exponent),
            s.plateau.lower,
            s.plateau.upper
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_profiles_csv(&profiles, File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
