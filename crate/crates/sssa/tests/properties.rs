//! Randomized invariants of the core algorithms.

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use sssa::fractional::{ora_realize, OraSpec};
use sssa::integrator::{
    split_jacobians, toy_multimachine, DdaeModel, DelaySelection, JacBlock, MixedPoint,
};
use sssa::participation::{classical_pf, generalized_pf};
use sssa::pencil::{MatrixPencil, MoebiusCoeffs};

const CASES: u32 = 24;

fn square(r: usize, entries: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((r, r), entries).unwrap()
}

/// One-sided spectral match: every element of `a` has a partner in `b`
/// within `tol` (absolute, scaled by magnitude).
fn spectra_match(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    a.iter().all(|za| {
        b.iter()
            .any(|zb| (za - zb).norm() <= tol * (1.0 + za.norm()))
    })
}

fn entries(r: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0..2.0f64, r * r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    /// The prime transform is the identity on the spectrum.
    #[test]
    fn prime_transform_preserves_spectrum(a_ent in entries(4)) {
        let a = square(4, a_ent);
        let e = Array2::<f64>::eye(4);
        let pencil = MatrixPencil::new(e, a).unwrap();
        let base = pencil.eigen(false).unwrap();
        let mapped = pencil
            .moebius_transform(&MoebiusCoeffs::prime())
            .unwrap()
            .eigen(false)
            .unwrap();
        prop_assert_eq!(base.nu, mapped.nu);
        prop_assert!(spectra_match(&base.finite_eigs, &mapped.finite_eigs, 1e-7));
    }

    /// Special transforms composed with their inverse map recover the
    /// original finite spectrum, including pencils with singular E.
    #[test]
    fn transforms_round_trip(a_ent in entries(4), sigma in 2.0..5.0f64, rank in 2usize..=4) {
        let a = square(4, a_ent);
        let mut e = Array2::<f64>::eye(4);
        for k in rank..4 {
            e[[k, k]] = 0.0; // singular E exercises infinite eigenvalues
        }
        let pencil = MatrixPencil::new(e, a).unwrap();
        prop_assume!(pencil.is_regular(6, 0).unwrap());
        let base = pencil.eigen(false).unwrap();
        // Keep the shift away from the spectrum so the transform is defined.
        prop_assume!(base
            .finite_eigs
            .iter()
            .all(|z| (z - Complex64::new(sigma, 0.0)).norm() > 0.3));
        for coeffs in [
            MoebiusCoeffs::invert(),
            MoebiusCoeffs::shift_invert(sigma),
            MoebiusCoeffs::cayley(sigma),
            MoebiusCoeffs::generalized_cayley(sigma, -sigma * 0.5),
        ] {
            let sol = pencil.moebius_transform(&coeffs).unwrap().eigen(false).unwrap();
            let back: Vec<Complex64> = sol
                .finite_eigs
                .iter()
                .filter_map(|&z| coeffs.map_back(z))
                .collect();
            prop_assert!(
                spectra_match(&base.finite_eigs, &back, 1e-6),
                "base {:?} not recovered by {:?}: {:?}",
                base.finite_eigs,
                coeffs,
                back
            );
        }
    }

    /// Classical participation factor columns sum to one.
    #[test]
    fn classical_pf_columns_sum_to_one(a_ent in entries(4)) {
        let a = square(4, a_ent);
        let pf = classical_pf(&a).unwrap();
        for s in pf.column_sums() {
            prop_assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-7);
        }
    }

    /// Generalized participation factor columns sum to one on regular
    /// pencils with invertible E.
    #[test]
    fn generalized_pf_columns_sum_to_one(a_ent in entries(3), d in 0.5..2.0f64) {
        let a = square(3, a_ent);
        let mut e = Array2::<f64>::eye(3);
        e[[1, 1]] = d;
        e[[2, 2]] = 1.0 / d;
        let pencil = MatrixPencil::new(e, a).unwrap();
        let sol = pencil.eigen(true).unwrap();
        // Semisimple spectra only: defective pairs spread the unit sum
        // across the chain.
        for (i, zi) in sol.finite_eigs.iter().enumerate() {
            for zj in sol.finite_eigs.iter().skip(i + 1) {
                prop_assume!((zi - zj).norm() > 1e-3);
            }
        }
        let pf = generalized_pf(&pencil, &sol).unwrap();
        for s in pf.column_sums() {
            prop_assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-6, "sum {s}");
        }
    }

    /// ORA ladders interlace (zeros and poles alternate) and the explicit
    /// and semi-implicit realizations have identical transfer functions.
    #[test]
    fn ora_interlacing_and_form_equivalence(
        gamma in prop_oneof![-0.95..-0.05f64, 0.05..0.95f64],
        log_wb in -3.0..0.0f64,
        decades in 2.0..5.0f64,
        n in 3usize..=8,
        log_w in -2.5..1.5f64,
    ) {
        let omega_b = 10f64.powf(log_wb);
        let spec = OraSpec::new(gamma, omega_b, omega_b * 10f64.powf(decades), n).unwrap();
        let expl = ora_realize(&spec, false);
        let semi = ora_realize(&spec, true);
        // Interlacing within each ladder and band containment.
        for k in 0..n - 1 {
            if gamma < 0.0 {
                prop_assert!(expl.poles[k] < expl.zeros[k] && expl.zeros[k] < expl.poles[k + 1]);
            } else {
                prop_assert!(expl.zeros[k] < expl.poles[k] && expl.poles[k] < expl.zeros[k + 1]);
            }
        }
        prop_assert!(expl.poles[0] > spec.omega_b && expl.poles[n - 1] < spec.omega_h);
        // Transfer-function equivalence at a random in-band frequency, for
        // both the product form and the two state-space forms.
        let omega = omega_b * 10f64.powf(decades * (log_w + 2.5) / 4.0);
        let h_prod = expl.frequency_response(omega).unwrap();
        let h_expl = expl.state_space_response(omega).unwrap();
        let h_semi = semi.state_space_response(omega).unwrap();
        prop_assert!((h_prod - h_expl).norm() <= 1e-9 * h_prod.norm());
        prop_assert!((h_expl - h_semi).norm() <= 1e-9 * h_prod.norm());
    }

    /// Free and delayed Jacobian parts always recombine to the full
    /// Jacobian, for arbitrary admissible selections.
    #[test]
    fn split_jacobians_is_a_partition(mask in proptest::collection::vec(any::<bool>(), 64)) {
        let model = toy_multimachine();
        let (x, y) = model.initial().unwrap();
        let empty = DelaySelection::empty();
        let p = MixedPoint::new(&x, &y, &x, &y, &empty);
        let trip = model.jacobians(&p);
        let full = split_jacobians(&trip, &empty, model.n(), model.m());
        // Select a random subset of the structural nonzeros.
        let mut chosen = Vec::new();
        let mut k = 0usize;
        for (block, list) in [
            (JacBlock::Fx, &trip.fx),
            (JacBlock::Fy, &trip.fy),
            (JacBlock::Gx, &trip.gx),
            (JacBlock::Gy, &trip.gy),
        ] {
            for &(r, c, _) in list {
                if mask.get(k).copied().unwrap_or(false) && !chosen.contains(&(block, r, c)) {
                    chosen.push((block, r, c));
                }
                k += 1;
            }
        }
        let sel = DelaySelection::from_entries(&chosen).unwrap();
        let split = split_jacobians(&trip, &sel, model.n(), model.m());
        for (free, del, whole) in [
            (&split.free_fx, &split.del_fx, &full.free_fx),
            (&split.free_fy, &split.del_fy, &full.free_fy),
            (&split.free_gx, &split.del_gx, &full.free_gx),
            (&split.free_gy, &split.del_gy, &full.free_gy),
        ] {
            prop_assert_eq!(&(free + del), whole);
        }
        prop_assert_eq!(split.nnz_full, full.nnz_full);
        prop_assert_eq!(split.nnz_free, split.nnz_full - sel.len());
    }
}

/// Deterministic helper coverage used by the properties above.
#[test]
fn spectra_match_rejects_mismatch() {
    let a = vec![Complex64::new(1.0, 0.0)];
    let b = vec![Complex64::new(2.0, 0.0)];
    assert!(!spectra_match(&a, &b, 1e-6));
    assert!(spectra_match(&a, &a, 1e-12));
}

/// Chebyshev discretization is exact for the delay-free limit: with a zero
/// delayed matrix the retained spectrum reproduces the ODE eigenvalues.
#[test]
fn cheb_zero_delay_matches_ode() {
    use sssa::delay::{delay_spectrum, DelayLti};
    let a0 = ndarray::array![[-1.0, 2.0], [-2.0, -1.5]];
    let sys = DelayLti::new(a0.clone(), vec![(Array2::zeros((2, 2)), 0.5)]).unwrap();
    let spec = delay_spectrum(&sys, 16).unwrap();
    use ndarray_linalg::Eig;
    let (eigs, _) = a0.eig().unwrap();
    for lam in eigs.iter() {
        assert!(
            spec.iter().any(|z| (z - lam).norm() < 1e-8),
            "ODE eigenvalue {lam} missing from retained spectrum {spec:?}"
        );
    }
}
