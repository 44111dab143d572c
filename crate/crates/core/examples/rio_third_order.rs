//! Builds the third-order robust control at the reference duration and
//! checks its transfer and its flatness in the amplitude error.

use std::f64::consts::PI;

use drio::cli::describe_rabi;
use drio::control::{rio_third_order, RioParams};
use drio::optimizer::{constraint_residuals, transfer_infidelity};

fn main() -> drio::Result<()> {
    let duration = 381.84;
    let rabi = 1.86 * PI / duration;
    let control = rio_third_order(rabi)?;
    let params = RioParams::third_order();
    println!("Ω = {}", describe_rabi(rabi));
    println!(
        "m = {}, ω/Ω = {:.6}, Δ₀/Ω = {:.6}, T = {:.2} ns",
        params.m.value(),
        params.omega_over_rabi,
        params.delta0_over_rabi,
        control.duration()
    );
    println!("1 − P at α = 0: {:.2e}", transfer_infidelity(&control)?);
    for (k, r) in constraint_residuals(&control, 4)?.iter().enumerate() {
        println!("d^{}(1 − P)/dα^{} = {r:+.3e}", k + 1, k + 1);
    }

    println!("\n  t/T     Δ/Ω      φ (rad)");
    for i in 0..=8 {
        let t = control.duration() * i as f64 / 8.0;
        println!("{:5.3} {:+8.4} {:+9.4}", t / control.duration(), control.detuning(t) / rabi, control.phase(t));
    }

    // The rounded constants are the shortest exactly robust member.
    let exact = RioParams::third_order_exact().control(rabi)?;
    let r = constraint_residuals(&exact, 3)?;
    println!("\nexact member: T·Ω/π = {:.5}, max |residual| = {:.1e}", exact.area_multiple(), r.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    Ok(())
}
