//! Choosing which Jacobian couplings may read the previous step:
//! geometric controllability/observability scores over the relevant modes,
//! threshold selection with a density report, and the largest admissible
//! step size for a given eigenvalue-distortion budget.
//!
//! Run with: cargo run --example gco_selection

use ndarray::Array1;
use sssa::integrator::{
    gco_scores, linearize, max_step_estimate, select_delayed, toy_multimachine, DdaeModel,
    GCO_FN_RANGE,
};

fn main() -> sssa::Result<()> {
    let model = toy_multimachine();
    let (x0, y0): (Array1<f64>, Array1<f64>) = model.initial()?;
    let dae = linearize(&model, &x0, &y0)?;

    let table = gco_scores(&dae, GCO_FN_RANGE)?;
    println!(
        "GCO scores over {} relevant modes, {} structural nonzeros",
        table.modes.len(),
        table.entries.len()
    );
    let mut sorted = table.entries.clone();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    println!("top couplings:");
    for e in sorted.iter().take(6) {
        println!("  {:?}[{}, {}]  score {:.4}", e.block, e.row, e.col, e.score);
    }
    println!("weakest couplings:");
    for e in sorted.iter().rev().take(6) {
        println!("  {:?}[{}, {}]  score {:.4}", e.block, e.row, e.col, e.score);
    }

    // Threshold selection: couplings scoring below gco_max may be delayed
    // (g_y entries are never delayed; they must stay in the free part).
    for gco_max in [1e-4, 1e-2, 0.05] {
        let (sel, density) = select_delayed(&table, gco_max)?;
        println!(
            "\ngco_max = {gco_max}: {} couplings delayed, iteration-matrix nnz {} of {}",
            sel.len(),
            density.nnz_kept(),
            density.nnz_full()
        );
        for (block, full, kept) in &density.blocks {
            println!("  {block:?}: {kept} of {full} kept");
        }

        // Largest step keeping the worst relative eigenvalue error below 1%.
        let grid = [0.005, 0.01, 0.02, 0.05, 0.1];
        let report = max_step_estimate(&dae, &sel, 0.01, &grid, 16, Some(8))?;
        println!("  h_max (eta <= 1%): {:?}", report.h_max);
        for (h, eta) in &report.etas {
            println!("    h = {h:5.3}: eta = {eta:.3e}");
        }
    }
    Ok(())
}
