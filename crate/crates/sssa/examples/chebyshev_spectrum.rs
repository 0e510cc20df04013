//! Spectrum of retarded delay systems by Chebyshev differentiation:
//! rightmost characteristic roots of classic scalar delay equations, Newton
//! refinement, and convergence in the number of collocation points.
//!
//! Run with: cargo run --example chebyshev_spectrum

use ndarray::array;
use num_complex::Complex64;
use sssa::delay::{delay_spectrum, refine_root, spurious_cutoff, DelayLti};

fn main() -> sssa::Result<()> {
    // x'(t) = -x(t - 1): rightmost pair near -0.3181 +/- 1.3372j.
    let sys = DelayLti::new(array![[0.0]], vec![(array![[-1.0]], 1.0)])?;
    let eigs = delay_spectrum(&sys, 20)?;
    println!(
        "x' = -x(t-1), N_C = 20, cutoff {:.1}: rightmost roots",
        spurious_cutoff(20, 1.0)
    );
    for z in eigs.iter().take(4) {
        println!("  {z:.6}");
    }
    let refined = refine_root(&sys, eigs[0], 1e-14, 50)?;
    println!("Newton-refined rightmost root: {refined:.12}");

    // x'(t) = -x(t - pi/2): marginal roots exactly at +/- j.
    let half_pi = std::f64::consts::FRAC_PI_2;
    let sys2 = DelayLti::new(array![[0.0]], vec![(array![[-1.0]], half_pi)])?;
    let eigs2 = delay_spectrum(&sys2, 20)?;
    println!("\nx' = -x(t - pi/2): rightmost root {:.8} (expect +/- j)", eigs2[0]);

    // Convergence of the rightmost root with N_C.
    println!("\nconvergence against the refined oracle:");
    let oracle = refine_root(&sys, Complex64::new(-0.3, 1.3), 1e-14, 50)?;
    for n_c in [8, 12, 16, 20, 24] {
        let e = delay_spectrum(&sys, n_c)?;
        let best = e
            .iter()
            .map(|z| (z - oracle).norm().min((z.conj() - oracle).norm()))
            .fold(f64::INFINITY, f64::min);
        println!("  N_C = {n_c:2}: error {best:.3e}");
    }
    Ok(())
}
