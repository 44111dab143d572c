//! Compares the kick, full Gaussian, effective and mode-truncated models for
//! the same digital train as the subpulses narrow.

use std::f64::consts::PI;

use drio::control::rio_third_order;
use drio::digitize::{digitize, effective_control};
use drio::propagate::{
    propagate_delta_train, propagate_effective, propagate_full, propagate_modes, ModeTruncation, QubitState,
};

fn main() -> drio::Result<()> {
    let control = rio_third_order(1.86 * PI / 381.84)?;
    let init = QubitState::ground();
    println!("τ/σ   P_delta          |P_delta − P_full|  P_eff           P(k=0)          P(k=5)");
    for ratio in [4.0, 6.0, 8.0, 12.0] {
        let train = digitize(&control, 15, ratio)?;
        let delta = propagate_delta_train(&train, init).final_transfer();
        let full = propagate_full(&train, init, 1e-12)?.final_transfer();
        let eff = propagate_effective(&effective_control(&train)?, init, 1e-12)?.final_transfer();
        let k0 = propagate_modes(&train, ModeTruncation::for_train(&train, 0), init, 1e-10)?.final_transfer();
        let k5 = propagate_modes(&train, ModeTruncation::for_train(&train, 5), init, 1e-10)?.final_transfer();
        println!("{ratio:4} {delta:.12} {:18.2e} {eff:.12} {k0:.12} {k5:.12}", (delta - full).abs());
    }
    Ok(())
}
