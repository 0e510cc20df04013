//! Fractional-order control loop stability: close a descriptor plant with a
//! fractional PI controller and evaluate the sector criterion through the
//! spectrum of the doubled linear pencil.
//!
//! Run with: cargo run --example fractional_stability

use sssa::dae::example_ch4;
use sssa::fractional::{assemble_closed_loop, foc_block, fractional_stability, FocKind};

fn main() -> sssa::Result<()> {
    let plant = example_ch4();
    let gamma = 0.6;
    let block = foc_block(FocKind::Fopi { kp: 7.0, ki: 10.0 })?;
    let cl = assemble_closed_loop(
        &plant.pencil.e,
        &plant.pencil.a,
        &plant.b,
        &plant.c,
        &plant.d,
        &block,
        gamma,
    )?;
    let report = fractional_stability(&cl)?;
    println!(
        "doubled pencil: {} finite eigenvalues, {} infinite",
        report.eigenvalues.len(),
        report.inf_multiplicity
    );
    println!(
        "sector threshold |Arg(lambda)| > {:.4} rad (gamma = {gamma})",
        report.threshold_rad
    );
    for (lam, arg) in report.eigenvalues.iter().zip(&report.args_rad) {
        let ok = if *arg > report.threshold_rad { "ok" } else { "VIOLATED" };
        println!("  {lam:10.4}   |Arg| = {arg:.4}   {ok}");
    }
    println!("closed loop stable: {}", report.stable);
    Ok(())
}
