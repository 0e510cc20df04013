//! Participation factors: classical (explicit ODE), generalized (singular
//! pencil, left/right eigenvectors weighted by E), Jordan-chain PFs for a
//! defective eigenvalue, and output participation of algebraic variables.
//!
//! Run with: cargo run --example participation_factors

use ndarray::array;
use num_complex::Complex64;
use sssa::dae::example_ch3;
use sssa::participation::{
    classical_pf, compute_jordan_chains, generalized_pf, jordan_pf, output_pf,
};

fn main() -> sssa::Result<()> {
    // Classical PFs of a small explicit system.
    let a = array![[-1.0, 0.5], [0.0, -4.0]];
    let pf = classical_pf(&a)?;
    println!("classical PF matrix (rows = states, cols = modes):");
    for (k, row) in pf.values.outer_iter().enumerate() {
        let vals: Vec<f64> = row.iter().map(|z| z.re).collect();
        println!("  {}: {vals:.4?}", pf.row_labels[k]);
    }
    println!("column sums: {:?}", pf.column_sums());

    // Generalized PFs of the 5x5 singular pencil: the simple mode at -3.
    let pencil = example_ch3();
    let sol = pencil.eigen(true)?;
    let gpf = generalized_pf(&pencil, &sol)?;
    println!("\ngeneralized PFs, mode lambda = -3:");
    let idx = gpf
        .eigenvalues
        .iter()
        .position(|z| (z - Complex64::new(-3.0, 0.0)).norm() < 1e-6)
        .expect("mode -3 present");
    for k in 0..5 {
        println!(
            "  {}: {:.4}",
            gpf.row_labels[k],
            gpf.values[[k, idx]].norm()
        );
    }

    // Jordan-chain PFs of the defective pair at -2: constants plus the
    // polynomial-in-t coefficients of the modal response.
    let chains = compute_jordan_chains(&pencil, Complex64::new(-2.0, 0.0), 2)?;
    println!(
        "\nJordan chains at -2: beta = {}, residual = {:.2e}",
        chains.beta(),
        chains.residual(&pencil)
    );
    let jpf = jordan_pf(&pencil, &chains)?;
    let polys = jpf.time_poly.as_ref().expect("jordan PFs carry t-terms");
    println!("per-variable pi_k(t) = c0 + c1 t (defective mode):");
    for k in 0..5 {
        println!(
            "  {}: {:.4} + {:.4} t",
            jpf.row_labels[k],
            polys[0][[k, 0]].re,
            polys[1][[k, 0]].re
        );
    }

    // Output participation: apply an output matrix to the PF rows.
    let c = array![[1.0, 1.0, 0.0, 0.0, 0.0]];
    let opf = output_pf(&gpf, &c)?;
    println!(
        "\noutput PF (w = x1 + x2) for lambda = -3: {:.4}",
        opf.values[[0, idx]].norm()
    );
    Ok(())
}
