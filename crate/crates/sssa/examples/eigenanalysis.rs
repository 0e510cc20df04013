//! Matrix-pencil eigenanalysis: finite/infinite classification, damping and
//! frequency indicators, and the stability verdict.
//!
//! Run with: cargo run --example eigenanalysis

use sssa::dae::{example_ch3, example_ch4};
use sssa::pencil::{damping_and_frequency, stability_verdict};

fn main() -> sssa::Result<()> {
    // A 5x5 pencil with a singular E: three finite eigenvalues (one
    // defective pair at -2) and two infinite ones.
    let pencil = example_ch3();
    println!("5x5 pencil: regular = {}", pencil.is_regular(6, 0)?);
    let sol = pencil.eigen(false)?;
    println!(
        "finite eigenvalues ({} of {}):",
        sol.finite_eigs.len(),
        pencil.r()
    );
    for lam in &sol.finite_eigs {
        let (zeta, fn_hz) = damping_and_frequency(*lam)?;
        println!("  {lam:.6}   zeta = {zeta:.4}   fn = {fn_hz:.4} Hz");
    }
    println!("infinite multiplicity: {}", sol.inf_multiplicity);
    let verdict = stability_verdict(&sol, 0.05, 0.0);
    println!(
        "verdict: stable = {}, well damped = {}, abscissa = {:.3}",
        verdict.stable, verdict.well_damped, verdict.spectral_abscissa
    );

    // The 7x7 plant: one unstable mode at +1.
    let plant = example_ch4();
    let sol = plant.pencil.eigen(false)?;
    let mut eigs: Vec<f64> = sol.finite_eigs.iter().map(|z| z.re).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("\n7x7 plant finite spectrum: {eigs:.3?}");
    println!("infinite multiplicity: {}", sol.inf_multiplicity);
    Ok(())
}
