//! Moebius spectral transforms of a matrix pencil: prime, invert,
//! shift-and-invert, and (generalized) Cayley, with the eigenvalue map
//! verified by transforming and mapping back.
//!
//! Run with: cargo run --example spectral_transforms

use sssa::dae::example_ch3;
use sssa::pencil::MoebiusCoeffs;

fn main() -> sssa::Result<()> {
    let pencil = example_ch3();
    let base = pencil.eigen(false)?;
    println!("base finite spectrum:");
    for lam in &base.finite_eigs {
        println!("  {lam:.6}");
    }

    let transforms: Vec<(&str, MoebiusCoeffs)> = vec![
        ("prime", MoebiusCoeffs::prime()),
        ("invert", MoebiusCoeffs::invert()),
        ("shift-invert (sigma = 1)", MoebiusCoeffs::shift_invert(1.0)),
        ("cayley (sigma = 1)", MoebiusCoeffs::cayley(1.0)),
        (
            "generalized cayley (1, -2)",
            MoebiusCoeffs::generalized_cayley(1.0, -2.0),
        ),
    ];
    for (name, coeffs) in transforms {
        let mapped = pencil.moebius_transform(&coeffs)?;
        let sol = mapped.eigen(false)?;
        // Map each transformed eigenvalue back to the original plane.
        let mut back: Vec<f64> = sol
            .finite_eigs
            .iter()
            .filter_map(|&z| coeffs.map_back(z))
            .map(|s| s.re)
            .collect();
        back.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "\n{name}: nu = {}, mu = {}, mapped-back real parts = {back:.4?}",
            sol.finite_eigs.len(),
            sol.inf_multiplicity
        );
    }
    Ok(())
}
