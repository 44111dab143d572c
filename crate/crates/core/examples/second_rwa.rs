//! Subpulses of area near 2π with a steady phase step: the effective
//! description fails and the comb harmonics are needed.

use std::f64::consts::PI;

use drio::digitize::{validate, PulseShape, Subpulse, SubpulseTrain};
use drio::propagate::{propagate_delta_train, propagate_full, propagate_modes, ModeTruncation, QubitState};

fn main() -> drio::Result<()> {
    let (sigma, tau, n) = (1.0, 6.0, 15);
    let init = QubitState::ground();
    println!("A/π   Δφ    margin  P(k=0)  P(k=2)  P(k=20) P_full  P_delta");
    for (area, step) in [(0.2, 0.1), (1.0, 0.5), (1.9, 0.5), (2.0, 1.0)] {
        let peak = area * PI / (PI.sqrt() * sigma);
        let pulses = (0..n)
            .map(|k| Subpulse { center: (k as f64 + 0.5) * tau, peak_rabi: peak, phase: step * k as f64 })
            .collect();
        let train = SubpulseTrain::new(sigma, tau, PulseShape::Gaussian, pulses)?;
        let modes = |k| -> drio::Result<f64> {
            Ok(propagate_modes(&train, ModeTruncation::for_train(&train, k), init, 1e-10)?.final_transfer())
        };
        println!(
            "{area:3.1} {step:5.2} {:7.2} {:7.4} {:7.4} {:7.4} {:7.4} {:7.4}",
            validate(&train).second_rwa_margin,
            modes(0)?,
            modes(2)?,
            modes(20)?,
            propagate_full(&train, init, 1e-10)?.final_transfer(),
            propagate_delta_train(&train, init).final_transfer()
        );
    }
    Ok(())
}
