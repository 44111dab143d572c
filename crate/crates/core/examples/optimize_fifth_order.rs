//! Searches the shortest fifth-order control in the sine basis, then checks
//! it against finite differences. Takes about a minute; pass `3` to search
//! third order instead, or `elliptic` for the elliptic family.

use drio::control::ContinuousControl;
use drio::optimizer::{
    constraint_residuals, finite_difference_residuals, optimize_elliptic, optimize_with, DetuningAnsatz,
    OptimizerConfig,
};

fn main() -> drio::Result<()> {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "5".into());
    let config = OptimizerConfig::default();
    if arg == "elliptic" {
        let fit = optimize_elliptic(1, &config)?;
        println!(
            "m = {:.4}, ω/Ω = {:.4}, Δ₀/Ω = {:.4}, T·Ω/π = {:.4}",
            fit.m, fit.omega_over_rabi, fit.delta0_over_rabi, fit.area_multiple
        );
        return Ok(());
    }
    let order: u32 = arg.parse().map_err(|_| drio::Error::Usage(format!("expected 3, 5 or elliptic, got {arg}")))?;
    let (control, report) = optimize_with(order, 1.0, &DetuningAnsatz::new(8), 1, &config)?;
    println!(
        "order {order}: T·Ω/π = {:.4} after {} starts in {:.1} s, accepted: {}",
        report.t_times_omega_over_pi, report.seeds_tried, report.wall_time, report.accepted
    );
    println!("coefficients {:?}", report.coefficients);
    compare(&control, order as usize)
}

fn compare(control: &ContinuousControl, order: usize) -> drio::Result<()> {
    let series = constraint_residuals(control, order + 1)?;
    let fd = finite_difference_residuals(control, order + 1, 0.02, 1e-12)?;
    println!(" k   series        finite difference");
    for (k, (s, f)) in series.iter().zip(&fd).enumerate() {
        println!("{:2}  {s:+.4e}  {:+.4e}{}", k + 1, f.value, if f.noise_limited { " (noise)" } else { "" });
    }
    Ok(())
}
