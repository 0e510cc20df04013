//! Delay stability of a one-machine system with a retarded stabilizing
//! signal: analytic crossing curves, delay-independent gain band, delay
//! margin, and a scanned (tau, gain) stability map.
//!
//! Run with: cargo run --example delay_maps

use sssa::dae::{omib_linear, OmibParams};
use sssa::delay::{
    delay_independent_band, delay_margin, log_grid, omib_pr_delay_lti, sigma_crossings,
    stability_map, MapKind, SecondOrderPr,
};

fn main() -> sssa::Result<()> {
    let omib = omib_linear(&OmibParams::default())?;
    let eps = 1.0 / omib.omega_b;
    let sys = |c: f64| SecondOrderPr::from_omib(&omib, c / eps, 0.0, 0.0);

    // Delay-independent band for c = 0.4.
    let ((lo, hi), kind) = delay_independent_band(0.4, eps);
    println!("delay-independent band (c = 0.4): ({lo:.2}, {hi:.2}) {kind:?}");

    // Crossing curves on the imaginary axis, c = -0.4.
    let grid = log_grid(1e-1, 1e2, 200);
    let set = sigma_crossings(&sys(-0.4)?, 0.0, &grid, &[1, -1], &[0, 1])?;
    println!(
        "crossing curves (c = -0.4): {} points over 4 branches, first: tau = {:.4}, K = {:.2}",
        set.points.len(),
        set.points[0].tau_cr,
        set.points[0].k_cr
    );

    // Delay margins via spectral bisection over a reachable gain set.
    let gains: Vec<f64> = (1..=150).map(|i| 10.0 * i as f64).collect();
    for c in [-0.4, 0.0] {
        let margin = delay_margin(&sys(c)?, &gains, 0.3, 14, 1e-4)?;
        println!("delay margin (c = {c}): {margin:?} s");
    }

    // Coarse sigma map over the (tau, gain) plane, c = -0.4.
    let tau_axis: Vec<f64> = (1..=8).map(|i| 0.05 * i as f64).collect();
    let gain_axis: Vec<f64> = (-4..=4).map(|i| 250.0 * i as f64).collect();
    let map = stability_map(
        |tau, k| omib_pr_delay_lti(&omib, -0.4 / eps, k, tau),
        &tau_axis,
        &gain_axis,
        12,
        MapKind::Sigma,
    )?;
    println!("\nsigma map (rows = gain, cols = tau; '+' stable, '-' unstable):");
    print!("{:>8}", "K \\ tau");
    for tau in &tau_axis {
        print!("{tau:>7.2}");
    }
    println!();
    for (i, k) in map.gain_axis.iter().enumerate() {
        print!("{k:>8.0}");
        for j in 0..tau_axis.len() {
            let v = map.metric[[i, j]];
            let mark = if v.is_nan() {
                "?"
            } else if v < 0.0 {
                "+"
            } else {
                "-"
            };
            print!("{mark:>7}");
        }
        println!();
    }
    println!("failed cells: {}", map.failures.len());
    Ok(())
}
