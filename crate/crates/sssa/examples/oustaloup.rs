//! Oustaloup recursive approximation of a fractional operator s^gamma:
//! pole/zero ladder, frequency response against the ideal operator, and the
//! equivalence of the explicit and semi-implicit state-space forms.
//!
//! Run with: cargo run --example oustaloup

use sssa::fractional::{ora_realize, ora_step_error, suggest_order, OraSpec};

fn main() -> sssa::Result<()> {
    let gamma = -0.7;
    let (omega_b, omega_h) = (1e-3, 1e3);
    println!(
        "suggested order for [{omega_b:.0e}, {omega_h:.0e}]: {}",
        suggest_order(omega_b, omega_h)
    );

    let spec = OraSpec::new(gamma, omega_b, omega_h, 11)?;
    let explicit = ora_realize(&spec, false);
    let semi = ora_realize(&spec, true);
    println!("zeros: {:?}", explicit.zeros.iter().map(|z| format!("{z:.4e}")).collect::<Vec<_>>());
    println!("poles: {:?}", explicit.poles.iter().map(|p| format!("{p:.4e}")).collect::<Vec<_>>());
    println!("high-frequency gain: {:.6e}", explicit.hf_gain);

    println!("\n  omega      |H| dB    ideal dB   phase deg  ideal deg  |expl - semi|");
    for k in 0..7 {
        let omega = 1e-3 * 10f64.powi(k);
        let h = explicit.frequency_response(omega)?;
        let hs = semi.frequency_response(omega)?;
        let ideal_db = 20.0 * gamma * omega.log10();
        let ideal_deg = 90.0 * gamma;
        println!(
            "  {omega:8.0e}  {:8.3}  {ideal_db:9.3}  {:9.3}  {ideal_deg:9.3}  {:.2e}",
            20.0 * h.norm().log10(),
            h.arg().to_degrees(),
            (h - hs).norm()
        );
    }

    // Predicted tracking error of a unit-feedback loop K + s^{-0.5}.
    let err = ora_step_error(10.0, -0.5, 1e-4)?;
    println!("\npredicted steady-state error (K = 10, gamma = -0.5, omega_b = 1e-4): {err:.6}");
    Ok(())
}
