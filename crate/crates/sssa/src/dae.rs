//! Linearized DAE model container and reductions.
//!
//! A linearized differential-algebraic model
//!
//! ```text
//!   Δẋ = f_x Δx + f_y Δy
//!   0  = g_x Δx + g_y Δy
//! ```
//!
//! can either be reduced to the ODE state matrix `A_s = f_x − f_y g_y⁻¹ g_x`
//! (when `g_y` is invertible) or augmented into the singular matrix pencil
//!
//! ```text
//!   E_a = [T 0; R 0],   A_a = [f_x f_y; g_x g_y]
//! ```
//!
//! whose finite spectrum coincides with `eig(A_s)` in the explicit case
//! (`T = I`, `R = 0`). The module also provides output-matrix construction
//! and the built-in desk-scale example models used throughout the crate.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use ndarray_linalg::{FactorizeInto, Solve};

use crate::error::{Error, Result};
use crate::pencil::MatrixPencil;

/// Reciprocal-condition threshold below which `g_y` is treated as singular.
pub const GY_RCOND_MIN: f64 = 1e-12;

/// Linearized DAE model: constant Jacobian blocks at an equilibrium.
#[derive(Debug, Clone)]
pub struct LinearDae {
    pub fx: Array2<f64>,
    pub fy: Array2<f64>,
    pub gx: Array2<f64>,
    pub gy: Array2<f64>,
    pub state_names: Vec<String>,
    pub alg_names: Vec<String>,
}

/// Constant left-hand-side blocks of a semi-implicit DAE:
/// `T Δẋ = f(...)`, `R Δẋ + 0 = g(...)` row pattern in the augmented pencil.
#[derive(Debug, Clone)]
pub struct SemiImplicitLhs {
    pub t: Array2<f64>,
    pub r: Array2<f64>,
}

impl SemiImplicitLhs {
    /// The explicit special case `T = I`, `R = 0`.
    pub fn explicit(n: usize, m: usize) -> Self {
        SemiImplicitLhs {
            t: Array2::eye(n),
            r: Array2::zeros((m, n)),
        }
    }
}

/// Output map `Δw = h_x Δx + h_y Δy`.
#[derive(Debug, Clone)]
pub struct OutputMap {
    pub hx: Array2<f64>,
    pub hy: Array2<f64>,
    pub output_names: Vec<String>,
}

impl OutputMap {
    pub fn new(hx: Array2<f64>, hy: Array2<f64>, output_names: Vec<String>) -> Result<Self> {
        if hx.nrows() != hy.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "output map rows: h_x has {}, h_y has {}",
                hx.nrows(),
                hy.nrows()
            )));
        }
        if !output_names.is_empty() && output_names.len() != hx.nrows() {
            return Err(Error::DimensionMismatch(
                "output name count does not match output row count".into(),
            ));
        }
        Ok(OutputMap { hx, hy, output_names })
    }

    /// `(I, 0)`: the outputs are the state variables themselves.
    pub fn states(n: usize, m: usize) -> Self {
        OutputMap {
            hx: Array2::eye(n),
            hy: Array2::zeros((n, m)),
            output_names: Vec::new(),
        }
    }

    /// `(0, I)`: the outputs are the algebraic variables.
    pub fn algebraics(n: usize, m: usize) -> Self {
        OutputMap {
            hx: Array2::zeros((m, n)),
            hy: Array2::eye(m),
            output_names: Vec::new(),
        }
    }
}

impl LinearDae {
    pub fn new(
        fx: Array2<f64>,
        fy: Array2<f64>,
        gx: Array2<f64>,
        gy: Array2<f64>,
        state_names: Vec<String>,
        alg_names: Vec<String>,
    ) -> Result<Self> {
        let n = fx.nrows();
        let m = gy.nrows();
        if fx.ncols() != n {
            return Err(Error::DimensionMismatch("f_x must be square".into()));
        }
        if gy.ncols() != m {
            return Err(Error::DimensionMismatch("g_y must be square".into()));
        }
        if fy.dim() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "f_y must be {n}x{m}, got {}x{}",
                fy.nrows(),
                fy.ncols()
            )));
        }
        if gx.dim() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "g_x must be {m}x{n}, got {}x{}",
                gx.nrows(),
                gx.ncols()
            )));
        }
        if !state_names.is_empty() && state_names.len() != n {
            return Err(Error::DimensionMismatch("state name count != n".into()));
        }
        if !alg_names.is_empty() && alg_names.len() != m {
            return Err(Error::DimensionMismatch("algebraic name count != m".into()));
        }
        Ok(LinearDae { fx, fy, gx, gy, state_names, alg_names })
    }

    pub fn n(&self) -> usize {
        self.fx.nrows()
    }

    pub fn m(&self) -> usize {
        self.gy.nrows()
    }

    /// Solves `g_y X = B` after checking that `g_y` is well conditioned.
    ///
    /// Returns `g_y⁻¹ B`. The reciprocal condition number is estimated from
    /// the LU factorization; values at or below [`GY_RCOND_MIN`] are rejected.
    fn solve_gy(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        let m = self.m();
        if m == 0 {
            return Ok(Array2::zeros((0, b.ncols())));
        }
        let rc = gy_rcond(&self.gy)?;
        if !(rc > GY_RCOND_MIN) {
            return Err(Error::Precondition(format!(
                "g_y is singular or near-singular (reciprocal condition estimate {rc:.3e} <= {GY_RCOND_MIN:.0e})"
            )));
        }
        let fac = self
            .gy
            .clone()
            .factorize_into()
            .map_err(|e| Error::Numerical(format!("LU factorization of g_y failed: {e}")))?;
        let mut out = Array2::zeros((m, b.ncols()));
        for (j, col) in b.columns().into_iter().enumerate() {
            let sol = fac
                .solve(&col.to_owned())
                .map_err(|e| Error::Numerical(format!("solve with g_y failed: {e}")))?;
            out.column_mut(j).assign(&sol);
        }
        Ok(out)
    }

    /// State matrix of the reduced ODE: `A_s = f_x − f_y g_y⁻¹ g_x`.
    pub fn reduce_state_matrix(&self) -> Result<Array2<f64>> {
        if self.m() == 0 {
            return Ok(self.fx.clone());
        }
        let gyinv_gx = self.solve_gy(&self.gx)?;
        Ok(&self.fx - &self.fy.dot(&gyinv_gx))
    }

    /// Augmented matrix pencil `s E_a − A_a` with
    /// `E_a = [T 0; R 0]` and `A_a = [f_x f_y; g_x g_y]`.
    pub fn augment_pencil(&self, lhs: &SemiImplicitLhs) -> Result<MatrixPencil> {
        let (n, m) = (self.n(), self.m());
        if lhs.t.dim() != (n, n) || lhs.r.dim() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "semi-implicit LHS blocks must be {n}x{n} and {m}x{n}"
            )));
        }
        let mut e = Array2::zeros((n + m, n + m));
        e.slice_mut(s![..n, ..n]).assign(&lhs.t);
        e.slice_mut(s![n.., ..n]).assign(&lhs.r);
        let top = concatenate![Axis(1), self.fx, self.fy];
        let bot = concatenate![Axis(1), self.gx, self.gy];
        let a = concatenate![Axis(0), top, bot];
        MatrixPencil::new(e, a)
    }

    /// Convenience: the augmented pencil with the explicit LHS.
    pub fn augment_pencil_explicit(&self) -> Result<MatrixPencil> {
        self.augment_pencil(&SemiImplicitLhs::explicit(self.n(), self.m()))
    }

    /// Output matrix `C = h_x − h_y g_y⁻¹ g_x` of the reduced system.
    pub fn output_matrix(&self, map: &OutputMap) -> Result<Array2<f64>> {
        if map.hx.ncols() != self.n() || map.hy.ncols() != self.m() {
            return Err(Error::DimensionMismatch(
                "output map column counts do not match (n, m)".into(),
            ));
        }
        if self.m() == 0 {
            return Ok(map.hx.clone());
        }
        let gyinv_gx = self.solve_gy(&self.gx)?;
        Ok(&map.hx - &map.hy.dot(&gyinv_gx))
    }
}

/// Reciprocal condition estimate of a square matrix via LU.
pub fn gy_rcond(m: &Array2<f64>) -> Result<f64> {
    use ndarray_linalg::{Factorize, ReciprocalConditionNum};
    match m.factorize() {
        Ok(f) => {
            let rc = f
                .rcond()
                .map_err(|e| Error::Numerical(format!("condition estimate failed: {e}")))?;
            Ok(if rc.is_finite() { rc } else { 0.0 })
        }
        Err(_) => Ok(0.0),
    }
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

/// 5×5 singular pencil used as the running participation-factor example.
///
/// Finite eigenvalues: λ̂₁ = −2 (algebraic multiplicity 2, geometric 1, one
/// Jordan block of size 2) and λ̂₂ = −3; infinite eigenvalue of multiplicity 2.
pub fn example_ch3() -> MatrixPencil {
    let e = ndarray::arr2(&[
        [12.0, -3.0, 0.0, 0.0, 0.0],
        [4.0, 1.0, -1.0, 3.0, 0.0],
        [0.0, -4.0, -5.0, 1.0, 0.0],
        [8.0, 2.0, -5.0, 9.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]);
    let a = ndarray::arr2(&[
        [-17.0, 8.0, -2.0, 5.0, 3.0],
        [-7.0, -3.0, 3.0, -8.0, 1.0],
        [13.0, 9.0, 9.0, 3.0, 1.0],
        [-12.0, -7.0, 13.0, -22.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 1.0],
    ]);
    MatrixPencil::new(e, a).expect("built-in 5x5 pencil is well-formed")
}

/// 7×7 singular plant `(E, A, B, C, D)` with finite eigenvalues
/// {−5, −4, 1, −2, −3} and infinite multiplicity 2. `B = e₆`, `C = e₆ᵀ`, `D = 0`.
pub struct PlantCh4 {
    pub pencil: MatrixPencil,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
    pub d: Array2<f64>,
}

pub fn example_ch4() -> PlantCh4 {
    let e = ndarray::arr2(&[
        [4.0, 9.0, 9.0, -2.0, 10.0, 7.0, 3.0],
        [1.0, 5.0, 2.0, 2.0, 3.0, 1.0, 1.0],
        [1.0, 0.0, -2.0, -2.0, 6.0, 4.0, 1.0],
        [5.0, -2.0, -3.0, 18.0, 3.0, 16.0, 2.0],
        [6.0, 8.0, 6.0, 8.0, 6.0, 14.0, 2.0],
        [2.0, 11.0, 3.0, 6.0, 6.0, 2.0, 2.0],
        [4.0, 5.0, 5.0, 6.0, 2.0, 9.0, 1.0],
    ]);
    let a = ndarray::arr2(&[
        [-15.0, -43.0, -39.0, 4.0, -35.0, -22.0, -5.0],
        [-3.0, -19.0, -2.0, -5.0, -12.0, -2.0, 1.0],
        [-4.0, -16.0, -30.0, 6.0, -9.0, -1.0, -7.0],
        [-25.0, -2.0, 3.0, -72.0, -3.0, -74.0, -4.0],
        [-27.0, -32.0, -23.0, -39.0, -24.0, -66.0, -5.0],
        [-8.0, -41.0, -15.0, -18.0, -24.0, -8.0, -8.0],
        [-18.0, -15.0, -9.0, -29.0, -13.0, -48.0, -1.0],
    ]);
    let mut b = Array2::zeros((7, 1));
    b[(5, 0)] = 1.0;
    let mut c = Array2::zeros((1, 7));
    c[(0, 5)] = 1.0;
    let d = Array2::zeros((1, 1));
    PlantCh4 {
        pencil: MatrixPencil::new(e, a).expect("built-in 7x7 pencil is well-formed"),
        b,
        c,
        d,
    }
}

/// Parameters of the one-machine infinite-bus classical model.
#[derive(Debug, Clone)]
pub struct OmibParams {
    /// Internal EMF e'_q (pu).
    pub eq: f64,
    /// Infinite-bus voltage magnitude (pu).
    pub v: f64,
    /// Total reactance X'_d + X (pu).
    pub x_tot: f64,
    /// Mechanical power (pu).
    pub p_m: f64,
    /// Mechanical starting time M (MWs/MVA).
    pub m: f64,
    /// Nominal angular frequency Ω_b (rad/s).
    pub omega_b: f64,
    /// Damping coefficient D.
    pub d: f64,
    /// Optional override for the equilibrium angle δ₀ (rad). When absent,
    /// δ₀ = arcsin(P_m X_tot / (v e'_q)).
    pub delta0: Option<f64>,
}

impl Default for OmibParams {
    fn default() -> Self {
        // The reference parameterization: e'_q = 1.22, v = 1, X_tot = 0.7,
        // P_m = 1, M = 5, Ω_b = 100π, D = 0, δ₀ quoted as 0.61 rad.
        OmibParams {
            eq: 1.22,
            v: 1.0,
            x_tot: 0.7,
            p_m: 1.0,
            m: 5.0,
            omega_b: 100.0 * std::f64::consts::PI,
            d: 0.0,
            delta0: Some(0.61),
        }
    }
}

/// Linearized OMIB second-order system `Δδ̈ + d Δδ̇ + b Δδ = 0`.
#[derive(Debug, Clone)]
pub struct OmibLinear {
    /// Synchronizing coefficient b = Ω_b e'_q v cos(δ₀) / (M X_tot).
    pub b: f64,
    /// Damping coefficient d = D / M.
    pub d: f64,
    /// Equilibrium rotor angle δ₀ (rad).
    pub delta0: f64,
    /// Nominal angular frequency (rad/s), used to scale PR-control gains.
    pub omega_b: f64,
}

/// Builds the linearized OMIB model from the classical per-unit parameters.
pub fn omib_linear(p: &OmibParams) -> Result<OmibLinear> {
    let sin_d0 = p.p_m * p.x_tot / (p.v * p.eq);
    if sin_d0.abs() > 1.0 {
        return Err(Error::Precondition(format!(
            "equilibrium angle undefined: P_m X_tot / (v e'_q) = {sin_d0:.4} has magnitude > 1"
        )));
    }
    let delta0 = p.delta0.unwrap_or_else(|| sin_d0.asin());
    if p.m <= 0.0 {
        return Err(Error::InvalidInput("mechanical starting time M must be positive".into()));
    }
    Ok(OmibLinear {
        b: p.omega_b * p.eq * p.v * delta0.cos() / (p.m * p.x_tot),
        d: p.d / p.m,
        delta0,
        omega_b: p.omega_b,
    })
}

impl OmibLinear {
    /// State-space form with states (Δδ, Δω̂) where Δω̂ = Δδ̇/Ω_b:
    /// Δδ̇ = Ω_b Δω̂, Δω̂̇ = −(b/Ω_b) Δδ − d Δω̂.
    pub fn to_dae(&self) -> LinearDae {
        let fx = ndarray::arr2(&[
            [0.0, self.omega_b],
            [-self.b / self.omega_b, -self.d],
        ]);
        LinearDae::new(
            fx,
            Array2::zeros((2, 0)),
            Array2::zeros((0, 2)),
            Array2::zeros((0, 0)),
            vec!["delta".into(), "omega".into()],
            Vec::new(),
        )
        .expect("OMIB state-space model is well-formed")
    }
}

/// Right-hand side of a second-order companion form `ẍ + c₁ẋ + c₂x = 0`
/// as a 2×2 state matrix, used by tests and the delay module.
pub fn companion2(c1: f64, c2: f64) -> Array2<f64> {
    ndarray::arr2(&[[0.0, 1.0], [-c2, -c1]])
}

/// Solves the algebraic constraint `0 = g_x Δx + g_y Δy` for `Δy` given `Δx`.
pub fn algebraic_response(dae: &LinearDae, dx: &Array1<f64>) -> Result<Array1<f64>> {
    let rhs = dae.gx.dot(dx).insert_axis(Axis(1));
    let sol = dae.solve_gy(&rhs)?;
    Ok(-sol.index_axis(Axis(1), 0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reduce_matches_hand_evaluation() {
        // n = m = 1: A_s = f_x − f_y g_y⁻¹ g_x = −1 − 2·(−0.25)·1 = −0.5.
        let dae = LinearDae::new(
            ndarray::arr2(&[[-1.0]]),
            ndarray::arr2(&[[2.0]]),
            ndarray::arr2(&[[1.0]]),
            ndarray::arr2(&[[-4.0]]),
            vec![],
            vec![],
        )
        .unwrap();
        let a = dae.reduce_state_matrix().unwrap();
        assert_abs_diff_eq!(a[(0, 0)], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn decoupled_algebraics() {
        let dae = LinearDae::new(
            ndarray::arr2(&[[-2.0, 1.0], [0.0, -3.0]]),
            Array2::zeros((2, 1)),
            ndarray::arr2(&[[1.0, 1.0]]),
            ndarray::arr2(&[[1.0]]),
            vec![],
            vec![],
        )
        .unwrap();
        let a = dae.reduce_state_matrix().unwrap();
        assert_abs_diff_eq!(a[(0, 0)], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a[(1, 1)], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn augmented_explicit_structure_and_spectrum() {
        let dae = LinearDae::new(
            ndarray::arr2(&[[-1.0, 0.5, 0.0], [0.0, -2.0, 0.3], [0.1, 0.0, -3.0]]),
            ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]),
            ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            ndarray::arr2(&[[2.0, 0.1], [0.0, 1.5]]),
            vec![],
            vec![],
        )
        .unwrap();
        let pencil = dae.augment_pencil_explicit().unwrap();
        // Top-left identity, bottom rows zero.
        for i in 0..3 {
            assert_eq!(pencil.e[(i, i)], 1.0);
        }
        for j in 0..5 {
            assert_eq!(pencil.e[(3, j)], 0.0);
            assert_eq!(pencil.e[(4, j)], 0.0);
        }
        let a_s = dae.reduce_state_matrix().unwrap();
        let sol = pencil.eigen(false).unwrap();
        assert!(sol.inf_multiplicity >= 2);
        // Finite spectrum equals eig(A_s).
        use ndarray_linalg::Eig;
        let (ode_eigs, _) = a_s.eig().unwrap();
        let mut fin = sol.finite_eigs.clone();
        for lam in ode_eigs.iter() {
            let (idx, d) = fin
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - lam).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-8, "mode {lam} unmatched (distance {d:.3e})");
            fin.remove(idx);
        }
    }

    #[test]
    fn output_matrix_specializations() {
        let dae = LinearDae::new(
            ndarray::arr2(&[[-1.0, 2.0], [0.0, -4.0]]),
            ndarray::arr2(&[[1.0], [0.0]]),
            ndarray::arr2(&[[1.0, 1.0]]),
            ndarray::arr2(&[[-2.0]]),
            vec![],
            vec![],
        )
        .unwrap();
        let c_id = dae.output_matrix(&OutputMap::states(2, 1)).unwrap();
        assert_eq!(c_id, Array2::<f64>::eye(2));
        let c_alg = dae.output_matrix(&OutputMap::algebraics(2, 1)).unwrap();
        // −g_y⁻¹ g_x = −(−0.5)·[1 1] = [0.5 0.5].
        assert_abs_diff_eq!(c_alg[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c_alg[(0, 1)], 0.5, epsilon = 1e-14);
        let rates = OutputMap::new(dae.fx.clone(), dae.fy.clone(), vec![]).unwrap();
        let c_rate = dae.output_matrix(&rates).unwrap();
        let a_s = dae.reduce_state_matrix().unwrap();
        assert_abs_diff_eq!(c_rate[(0, 0)], a_s[(0, 0)], epsilon = 1e-14);
        assert_abs_diff_eq!(c_rate[(1, 1)], a_s[(1, 1)], epsilon = 1e-14);
    }

    #[test]
    fn singular_gy_rejected() {
        let dae = LinearDae::new(
            ndarray::arr2(&[[-1.0]]),
            ndarray::arr2(&[[1.0, 0.0]]),
            ndarray::arr2(&[[1.0], [1.0]]),
            ndarray::arr2(&[[1.0, 1.0], [1.0, 1.0]]),
            vec![],
            vec![],
        )
        .unwrap();
        let err = dae.reduce_state_matrix().unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn ch3_pencil_spectrum() {
        let p = example_ch3();
        let sol = p.eigen(false).unwrap();
        assert_eq!(sol.inf_multiplicity, 2);
        assert_eq!(sol.nu, 3);
        let mut re: Vec<f64> = sol.finite_eigs.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(re[0], -3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(re[1], -2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(re[2], -2.0, epsilon = 1e-6);
    }

    #[test]
    fn ch4_pencil_spectrum() {
        let plant = example_ch4();
        let sol = plant.pencil.eigen(false).unwrap();
        assert_eq!(sol.inf_multiplicity, 2);
        let mut re: Vec<f64> = sol.finite_eigs.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        let expect = [-5.0, -4.0, -3.0, -2.0, 1.0];
        for (got, want) in re.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn omib_reference_case() {
        let lin = omib_linear(&OmibParams::default()).unwrap();
        assert!((lin.b - 89.756).abs() < 0.01, "b = {}", lin.b);
        assert_abs_diff_eq!(lin.d, 0.0);
        // P_m = 0 → δ₀ = 0 when not overridden.
        let p0 = OmibParams { p_m: 0.0, delta0: None, ..OmibParams::default() };
        assert_abs_diff_eq!(omib_linear(&p0).unwrap().delta0, 0.0);
        // Infeasible loading is rejected.
        let bad = OmibParams { p_m: 2.0, delta0: None, ..OmibParams::default() };
        assert!(omib_linear(&bad).is_err());
    }
}
