//! Fractional-order dynamics: Oustaloup recursive approximation (ORA) of
//! `s^gamma`, fractional controller blocks, closed-loop fractional DAE
//! assembly, the doubled linear pencil, and the stability criterion
//! `|Arg(lambda)| > gamma_tilde * pi / 2`.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pencil::MatrixPencil;

// ---------------------------------------------------------------------------
// Oustaloup recursive approximation
// ---------------------------------------------------------------------------

/// Band-limited approximation request for `s^gamma`.
#[derive(Debug, Clone, Copy)]
pub struct OraSpec {
    /// Fractional order, `|gamma| <= 1` for a single block.
    pub gamma: f64,
    /// Low band edge, rad/s.
    pub omega_b: f64,
    /// High band edge, rad/s.
    pub omega_h: f64,
    /// Approximation order (number of pole/zero sections).
    pub n: usize,
}

impl OraSpec {
    pub fn new(gamma: f64, omega_b: f64, omega_h: f64, n: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma.abs() <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "fractional order must satisfy |gamma| <= 1 for a single block, got {gamma}; \
                 split larger orders with split_order"
            )));
        }
        if !(omega_b > 0.0 && omega_h > omega_b) {
            return Err(Error::InvalidInput(format!(
                "band edges must satisfy 0 < omega_b < omega_h, got [{omega_b}, {omega_h}]"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("approximation order must be >= 1".into()));
        }
        Ok(Self { gamma, omega_b, omega_h, n })
    }
}

/// Suggested approximation order for a band `[omega_b, omega_h]`: one
/// section per decade on each side of 1 rad/s, floored at 4.
pub fn suggest_order(omega_b: f64, omega_h: f64) -> usize {
    let nu_b = (-omega_b.log10()).round().max(0.0) as usize;
    let nu_h = omega_h.log10().round().max(0.0) as usize;
    (nu_b + nu_h).max(4)
}

/// Recursive zero/pole frequencies and high-frequency gain:
/// `omega'_k = omega_b * omega_v^{(2k-1-gamma)/N}`,
/// `omega_k  = omega_b * omega_v^{(2k-1+gamma)/N}`,
/// `omega_v = sqrt(omega_h/omega_b)`, gain `omega_h^gamma`.
pub fn ora_frequencies(spec: &OraSpec) -> (Vec<f64>, Vec<f64>, f64) {
    let omega_v = (spec.omega_h / spec.omega_b).sqrt();
    let nf = spec.n as f64;
    let zeros = (1..=spec.n)
        .map(|k| spec.omega_b * omega_v.powf((2.0 * k as f64 - 1.0 - spec.gamma) / nf))
        .collect();
    let poles = (1..=spec.n)
        .map(|k| spec.omega_b * omega_v.powf((2.0 * k as f64 - 1.0 + spec.gamma) / nf))
        .collect();
    (zeros, poles, spec.omega_h.powf(spec.gamma))
}

/// State-space form of an ORA realization.
#[derive(Debug, Clone)]
pub enum OraForm {
    /// Dense lower-triangular cascade: `chi' = A chi + B u`,
    /// `y = C chi + feedthrough * u`.
    Explicit {
        a: Array2<f64>,
        b: Array1<f64>,
        c: Array1<f64>,
        feedthrough: f64,
    },
    /// Sparse bidiagonal descriptor form with the output appended as the
    /// last variable: `E z' = A z + B u`, `y = z[N]`.
    SemiImplicit {
        e: Array2<f64>,
        a: Array2<f64>,
        b: Array1<f64>,
    },
}

/// Realized band-limited approximation of `s^gamma`.
#[derive(Debug, Clone)]
pub struct OraRealization {
    pub spec: OraSpec,
    /// `omega'_k`, strictly increasing.
    pub zeros: Vec<f64>,
    /// `omega_k`, strictly increasing.
    pub poles: Vec<f64>,
    /// `omega_h^gamma`.
    pub hf_gain: f64,
    pub form: OraForm,
}

/// Build an ORA realization in the requested form.
///
/// Explicit: section `k` contributes `chi_k' = -omega_k chi_k +
/// (omega'_k - omega_k)(omega_h^gamma u + sum_{j<k} chi_j)`, output
/// `y = sum_k chi_k + omega_h^gamma u`. Semi-implicit: `N+1` variables
/// `(chi_1..chi_N, y)` with bidiagonal `E` (`nnz = 2N`) and `A`
/// (`nnz = 2N+1`).
pub fn ora_realize(spec: &OraSpec, semi_implicit: bool) -> OraRealization {
    let (zeros, poles, hf_gain) = ora_frequencies(spec);
    let n = spec.n;
    let form = if semi_implicit {
        let mut e = Array2::<f64>::zeros((n + 1, n + 1));
        let mut a = Array2::<f64>::zeros((n + 1, n + 1));
        let mut b = Array1::<f64>::zeros(n + 1);
        // chi_1' = -omega_1 chi_1 + omega_h^gamma u
        e[[0, 0]] = 1.0;
        a[[0, 0]] = -poles[0];
        b[0] = hf_gain;
        // chi_k' - chi_{k-1}' = omega'_{k-1} chi_{k-1} - omega_k chi_k
        for k in 1..n {
            e[[k, k]] = 1.0;
            e[[k, k - 1]] = -1.0;
            a[[k, k]] = -poles[k];
            a[[k, k - 1]] = zeros[k - 1];
        }
        // -chi_N' = omega'_N chi_N - y
        e[[n, n - 1]] = -1.0;
        a[[n, n - 1]] = zeros[n - 1];
        a[[n, n]] = -1.0;
        OraForm::SemiImplicit { e, a, b }
    } else {
        let mut a = Array2::<f64>::zeros((n, n));
        let mut b = Array1::<f64>::zeros(n);
        for k in 0..n {
            let gap = zeros[k] - poles[k];
            for j in 0..k {
                a[[k, j]] = gap;
            }
            a[[k, k]] = -poles[k];
            b[k] = hf_gain * gap;
        }
        OraForm::Explicit {
            a,
            b,
            c: Array1::ones(n),
            feedthrough: hf_gain,
        }
    };
    OraRealization { spec: *spec, zeros, poles, hf_gain, form }
}

impl OraRealization {
    /// Product-form frequency response
    /// `H(j omega) = omega_h^gamma prod_k (j omega + omega'_k)/(j omega + omega_k)`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frequency must be positive, got {omega}"
            )));
        }
        let s = Complex64::new(0.0, omega);
        let mut h = Complex64::new(self.hf_gain, 0.0);
        for (&z, &p) in self.zeros.iter().zip(&self.poles) {
            h *= (s + z) / (s + p);
        }
        Ok(h)
    }

    /// Frequency response evaluated from the realized state-space form
    /// (used to cross-check the product form and the two realizations).
    pub fn state_space_response(&self, omega: f64) -> Result<Complex64> {
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frequency must be positive, got {omega}"
            )));
        }
        let s = Complex64::new(0.0, omega);
        match &self.form {
            OraForm::Explicit { a, b, c, feedthrough } => {
                let n = a.nrows();
                let m = Array2::from_shape_fn((n, n), |(i, j)| {
                    let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
                    diag - a[[i, j]]
                });
                let rhs = b.mapv(|x| Complex64::new(x, 0.0));
                let x = solve_complex(&m, &rhs)?;
                let cx: Complex64 = c
                    .iter()
                    .zip(x.iter())
                    .map(|(&ci, &xi)| xi * ci)
                    .sum();
                Ok(cx + feedthrough)
            }
            OraForm::SemiImplicit { e, a, b } => {
                let n = a.nrows();
                let m = Array2::from_shape_fn((n, n), |(i, j)| s * e[[i, j]] - a[[i, j]]);
                let rhs = b.mapv(|x| Complex64::new(x, 0.0));
                let z = solve_complex(&m, &rhs)?;
                Ok(z[n - 1])
            }
        }
    }
}

fn solve_complex(m: &Array2<Complex64>, b: &Array1<Complex64>) -> Result<Array1<Complex64>> {
    use ndarray_linalg::Solve;
    m.solve(b)
        .map_err(|e| Error::Numerical(format!("complex linear solve failed: {e}")))
}

/// Steady-state step error of the unity-feedback ORA loop with loop gain
/// `K`: `e_step(inf) = 1/(K + omega_b^gamma)`.
pub fn ora_step_error(k: f64, gamma: f64, omega_b: f64) -> Result<f64> {
    if !(omega_b > 0.0) {
        return Err(Error::InvalidInput("omega_b must be positive".into()));
    }
    let den = k + omega_b.powf(gamma);
    if den.abs() < 1e-300 {
        return Err(Error::Numerical(
            "steady-state error denominator K + omega_b^gamma vanishes".into(),
        ));
    }
    Ok(1.0 / den)
}

/// Split an arbitrary order into an integer part and a residual in `[0, 1)`
/// (exact integers map to residual 0): `gamma = n + residual`.
pub fn split_order(gamma: f64) -> (i64, f64) {
    let n = gamma.floor();
    (n as i64, gamma - n)
}

// ---------------------------------------------------------------------------
// Fractional controller blocks
// ---------------------------------------------------------------------------

/// Fractional-order controller kinds with their parameters.
#[derive(Debug, Clone, Copy)]
pub enum FocKind {
    /// Fractional integrator `K_i / s^gamma`.
    Foi { ki: f64 },
    /// Fractional PI `K_p + K_i / s^gamma`.
    Fopi { kp: f64, ki: f64 },
    /// Fractional lead-lag `K (1 + T1 s^gamma)/(1 + T2 s^gamma)`.
    FoLeadLag { k: f64, t1: f64, t2: f64 },
}

/// Fractional-DAE controller block
/// `E_c1 x' + E_cg x^(gamma) = A_c x + B_c u`, `y = C_c x + D_c u`.
#[derive(Debug, Clone)]
pub struct FocBlock {
    pub e_c1: Array2<f64>,
    pub e_cg: Array2<f64>,
    pub a_c: Array2<f64>,
    pub b_c: Array2<f64>,
    pub c_c: Array2<f64>,
    pub d_c: Array2<f64>,
}

impl FocBlock {
    /// Number of controller variables.
    pub fn order(&self) -> usize {
        self.a_c.nrows()
    }

    /// Number of controller outputs (plant inputs).
    pub fn outputs(&self) -> usize {
        self.c_c.nrows()
    }

    /// Number of controller inputs (plant outputs).
    pub fn inputs(&self) -> usize {
        self.b_c.ncols()
    }
}

/// Build the fractional-DAE matrices of a standard controller block.
pub fn foc_block(kind: FocKind) -> Result<FocBlock> {
    let check = |name: &str, v: f64| -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("parameter {name} must be finite, got {v}")))
        }
    };
    match kind {
        FocKind::Foi { ki } => {
            check("K_i", ki)?;
            Ok(FocBlock {
                e_c1: Array2::zeros((1, 1)),
                e_cg: Array2::eye(1),
                a_c: Array2::zeros((1, 1)),
                b_c: Array2::from_elem((1, 1), ki),
                c_c: Array2::eye(1),
                d_c: Array2::zeros((1, 1)),
            })
        }
        FocKind::Fopi { kp, ki } => {
            check("K_p", kp)?;
            check("K_i", ki)?;
            Ok(FocBlock {
                e_c1: Array2::zeros((1, 1)),
                e_cg: Array2::eye(1),
                a_c: Array2::zeros((1, 1)),
                b_c: Array2::from_elem((1, 1), ki),
                c_c: Array2::eye(1),
                d_c: Array2::from_elem((1, 1), kp),
            })
        }
        FocKind::FoLeadLag { k, t1, t2 } => {
            check("K", k)?;
            check("T1", t1)?;
            check("T2", t2)?;
            let mut e_cg = Array2::zeros((2, 2));
            e_cg[[0, 0]] = t2;
            e_cg[[1, 0]] = t1;
            let mut a_c = Array2::zeros((2, 2));
            a_c[[0, 0]] = -1.0;
            a_c[[1, 0]] = -1.0;
            a_c[[1, 1]] = 1.0;
            let mut b_c = Array2::zeros((2, 1));
            b_c[[0, 0]] = k;
            let mut c_c = Array2::zeros((1, 2));
            c_c[[0, 1]] = 1.0;
            Ok(FocBlock {
                e_c1: Array2::zeros((2, 2)),
                e_cg,
                a_c,
                b_c,
                c_c,
                d_c: Array2::zeros((1, 1)),
            })
        }
    }
}

/// Fractional power-system stabilizer block: washout gain `K_w` into two
/// cascaded fractional lead-lags `(1 + T1 s^gamma)/(1 + T2 s^gamma)`,
/// realized as the 4-variable block used in the WSCC example.
pub fn fopss_block(kw: f64, t1: f64, t2: f64) -> Result<FocBlock> {
    if !(kw.is_finite() && t1.is_finite() && t2.is_finite()) {
        return Err(Error::InvalidInput("FOPSS parameters must be finite".into()));
    }
    let mut e_cg = Array2::zeros((4, 4));
    e_cg[[0, 0]] = t2;
    e_cg[[1, 0]] = t1;
    e_cg[[2, 2]] = t2;
    e_cg[[3, 2]] = t1;
    let a_c = ndarray::array![
        [-1.0, 0.0, 0.0, 0.0],
        [-1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, -1.0, 0.0],
        [0.0, 0.0, -1.0, 1.0]
    ];
    let mut b_c = Array2::zeros((4, 1));
    b_c[[0, 0]] = kw;
    let mut c_c = Array2::zeros((1, 4));
    c_c[[0, 3]] = 1.0;
    Ok(FocBlock {
        e_c1: Array2::zeros((4, 4)),
        e_cg,
        a_c,
        b_c,
        c_c,
        d_c: Array2::zeros((1, 1)),
    })
}

// ---------------------------------------------------------------------------
// Closed-loop assembly and stability
// ---------------------------------------------------------------------------

/// Closed-loop fractional DAE `M x' + M_gamma x^(gamma) = A_cl x` of
/// dimension `rho = l + sigma + p`.
#[derive(Debug, Clone)]
pub struct FractionalClosedLoop {
    pub m: Array2<f64>,
    pub m_gamma: Array2<f64>,
    pub a_cl: Array2<f64>,
    pub gamma: f64,
    pub beta: f64,
}

/// Doubled linear pencil `s calE - calA` of dimension `2 rho` whose
/// spectrum carries the fractional stability information.
#[derive(Debug, Clone)]
pub struct FractionalPencil {
    pub cal_e: Array2<f64>,
    pub cal_a: Array2<f64>,
}

impl FractionalPencil {
    pub fn pencil(&self) -> Result<MatrixPencil> {
        MatrixPencil::new(self.cal_e.clone(), self.cal_a.clone())
    }
}

/// Interconnect a descriptor plant `(E, A, B, C, D)` with a fractional
/// controller block in negative-free unity feedback (`u = y_c`,
/// `u_c = y`): the closed loop eliminates the plant input through the
/// algebraic rows `0 = D_c C x + C_c x_c + (D_c D - I_p) u`.
pub fn assemble_closed_loop(
    e: &Array2<f64>,
    a: &Array2<f64>,
    b: &Array2<f64>,
    c: &Array2<f64>,
    d: &Array2<f64>,
    block: &FocBlock,
    gamma: f64,
) -> Result<FractionalClosedLoop> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Precondition(format!(
            "assembly requires gamma in (0,1), got {gamma}; pre-split with split_order"
        )));
    }
    let l = e.nrows();
    let p = b.ncols();
    let q = c.nrows();
    let sig = block.order();
    if a.nrows() != l || a.ncols() != l || e.ncols() != l {
        return Err(Error::DimensionMismatch("plant E, A must be square and equal-sized".into()));
    }
    if b.nrows() != l || c.ncols() != l || d.nrows() != q || d.ncols() != p {
        return Err(Error::DimensionMismatch("plant B, C, D dimensions inconsistent".into()));
    }
    if block.inputs() != q || block.outputs() != p {
        return Err(Error::DimensionMismatch(format!(
            "controller expects {} inputs and {} outputs, plant provides {q} outputs and {p} inputs",
            block.inputs(),
            block.outputs()
        )));
    }
    let rho = l + sig + p;
    let mut m = Array2::<f64>::zeros((rho, rho));
    m.slice_mut(s![..l, ..l]).assign(e);
    m.slice_mut(s![l..l + sig, l..l + sig]).assign(&block.e_c1);
    let mut m_gamma = Array2::<f64>::zeros((rho, rho));
    m_gamma
        .slice_mut(s![l..l + sig, l..l + sig])
        .assign(&block.e_cg);
    let mut a_cl = Array2::<f64>::zeros((rho, rho));
    a_cl.slice_mut(s![..l, ..l]).assign(a);
    a_cl.slice_mut(s![..l, l + sig..]).assign(b);
    a_cl.slice_mut(s![l..l + sig, ..l]).assign(&block.b_c.dot(c));
    a_cl.slice_mut(s![l..l + sig, l..l + sig]).assign(&block.a_c);
    a_cl.slice_mut(s![l..l + sig, l + sig..]).assign(&block.b_c.dot(d));
    a_cl.slice_mut(s![l + sig.., ..l]).assign(&block.d_c.dot(c));
    a_cl.slice_mut(s![l + sig.., l..l + sig]).assign(&block.c_c);
    let dd = block.d_c.dot(d) - Array2::<f64>::eye(p);
    a_cl.slice_mut(s![l + sig.., l + sig..]).assign(&dd);
    Ok(FractionalClosedLoop {
        m,
        m_gamma,
        a_cl,
        gamma,
        beta: 1.0 - gamma,
    })
}

/// Build the doubled linear pencil
/// `calE = [[I, 0], [0, M]]`, `calA = [[0, I], [A_cl, -M_gamma]]`.
pub fn fractional_pencil(cl: &FractionalClosedLoop) -> FractionalPencil {
    let rho = cl.m.nrows();
    let mut cal_e = Array2::<f64>::zeros((2 * rho, 2 * rho));
    cal_e
        .slice_mut(s![..rho, ..rho])
        .assign(&Array2::eye(rho));
    cal_e.slice_mut(s![rho.., rho..]).assign(&cl.m);
    let mut cal_a = Array2::<f64>::zeros((2 * rho, 2 * rho));
    cal_a
        .slice_mut(s![..rho, rho..])
        .assign(&Array2::eye(rho));
    cal_a.slice_mut(s![rho.., ..rho]).assign(&cl.a_cl);
    cal_a
        .slice_mut(s![rho.., rho..])
        .assign(&cl.m_gamma.mapv(|x| -x));
    FractionalPencil { cal_e, cal_a }
}

/// Stability verdict of a fractional closed loop.
#[derive(Debug, Clone)]
pub struct FractionalStabilityReport {
    /// Finite eigenvalues of the doubled linear pencil.
    pub eigenvalues: Vec<Complex64>,
    pub inf_multiplicity: usize,
    /// `gamma_tilde * pi / 2` with `gamma_tilde = min(gamma, 1 - gamma)`.
    pub threshold_rad: f64,
    /// `|Arg(lambda)|` per finite eigenvalue, in eigenvalue order.
    pub args_rad: Vec<f64>,
    /// Stable iff every finite eigenvalue satisfies `|Arg| > threshold`
    /// strictly.
    pub stable: bool,
}

/// Evaluate the fractional stability criterion through the spectrum of the
/// doubled LINEAR pencil (the nonlinear pencil `z(s) calE - calA` is never
/// solved directly).
pub fn fractional_stability(cl: &FractionalClosedLoop) -> Result<FractionalStabilityReport> {
    if !(cl.gamma > 0.0 && cl.gamma < 1.0) {
        return Err(Error::Precondition(format!(
            "stability criterion requires gamma in (0,1), got {}",
            cl.gamma
        )));
    }
    let fp = fractional_pencil(cl);
    let pencil = fp.pencil()?;
    let sol = pencil.eigen(false)?;
    let gamma_tilde = cl.gamma.min(1.0 - cl.gamma);
    let threshold = gamma_tilde * std::f64::consts::FRAC_PI_2;
    let args: Vec<f64> = sol.finite_eigs.iter().map(|z| z.arg().abs()).collect();
    let stable = args.iter().all(|&a| a > threshold);
    Ok(FractionalStabilityReport {
        eigenvalues: sol.finite_eigs,
        inf_multiplicity: sol.inf_multiplicity,
        threshold_rad: threshold,
        args_rad: args,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::example_ch4;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec(gamma: f64, n: usize) -> OraSpec {
        OraSpec::new(gamma, 1e-3, 1e3, n).unwrap()
    }

    #[test]
    fn frequencies_hand_value_and_zero_order() {
        let (z, p, gain) = ora_frequencies(&spec(-0.7, 4));
        // omega'_1 = 1e-3 * 1000^{(1+0.7)/4}
        assert_abs_diff_eq!(z[0], 1e-3 * 1000f64.powf(1.7 / 4.0), epsilon = 1e-12);
        assert_abs_diff_eq!(z[0], 1.884e-2, epsilon = 1e-4);
        assert_abs_diff_eq!(gain, 1e3f64.powf(-0.7), epsilon = 1e-12);
        let (z0, p0, g0) = ora_frequencies(&spec(0.0, 4));
        for k in 0..4 {
            assert_abs_diff_eq!(z0[k], p0[k], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(g0, 1.0, epsilon = 1e-15);
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn interlacing_both_signs() {
        for &gamma in &[0.6, -0.7, 0.99, -0.99] {
            let (z, p, _) = ora_frequencies(&spec(gamma, 6));
            let mut merged: Vec<f64> = Vec::new();
            for k in 0..6 {
                if gamma > 0.0 {
                    merged.push(z[k]);
                    merged.push(p[k]);
                } else {
                    merged.push(p[k]);
                    merged.push(z[k]);
                }
            }
            assert!(
                merged.windows(2).all(|w| w[0] < w[1]),
                "interlacing violated for gamma={gamma}"
            );
        }
    }

    #[test]
    fn explicit_single_section() {
        let sp = spec(-0.7, 1);
        let r = ora_realize(&sp, false);
        match &r.form {
            OraForm::Explicit { a, b, c, feedthrough } => {
                assert_abs_diff_eq!(a[[0, 0]], -r.poles[0], epsilon = 1e-15);
                assert_abs_diff_eq!(b[0], r.hf_gain * (r.zeros[0] - r.poles[0]), epsilon = 1e-15);
                assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(*feedthrough, r.hf_gain, epsilon = 1e-15);
            }
            _ => panic!("expected explicit form"),
        }
    }

    #[test]
    fn semi_implicit_sparsity() {
        let r = ora_realize(&spec(0.5, 4), true);
        match &r.form {
            OraForm::SemiImplicit { e, a, b } => {
                let nnz = |m: &Array2<f64>| m.iter().filter(|x| **x != 0.0).count();
                assert_eq!(nnz(e), 2 * 4);
                assert_eq!(nnz(a), 2 * 4 + 1);
                assert_eq!(b.iter().filter(|x| **x != 0.0).count(), 1);
            }
            _ => panic!("expected semi-implicit form"),
        }
    }

    #[test]
    fn forms_agree_with_product() {
        for &gamma in &[0.6, -0.7] {
            let sp = spec(gamma, 5);
            let ex = ora_realize(&sp, false);
            let si = ora_realize(&sp, true);
            for i in 0..50 {
                let omega = 1e-4 * 10f64.powf(8.0 * i as f64 / 49.0);
                let h = ex.frequency_response(omega).unwrap();
                let he = ex.state_space_response(omega).unwrap();
                let hs = si.state_space_response(omega).unwrap();
                assert!((he - h).norm() <= 1e-9 * h.norm(), "explicit mismatch at {omega}");
                assert!((hs - h).norm() <= 1e-9 * h.norm(), "semi-implicit mismatch at {omega}");
            }
        }
    }

    #[test]
    fn gain_anchors_and_midband_phase() {
        let sp = spec(-0.7, 11);
        let r = ora_realize(&sp, false);
        let dc = r.frequency_response(sp.omega_b / 100.0).unwrap();
        let hf = r.frequency_response(sp.omega_h * 100.0).unwrap();
        assert!((dc.norm() - sp.omega_b.powf(-0.7)).abs() < 1e-3 * sp.omega_b.powf(-0.7));
        assert!((hf.norm() - sp.omega_h.powf(-0.7)).abs() < 1e-3 * sp.omega_h.powf(-0.7));
        // Geometric mid-band phase ~ 90 * gamma degrees.
        let omega_mid = sp.omega_b * (sp.omega_h / sp.omega_b).sqrt();
        let ph = r.frequency_response(omega_mid).unwrap().arg().to_degrees();
        assert!((ph - 90.0 * -0.7).abs() < 2.0, "phase {ph}");
        // Mid-band magnitude slope ~ 20*gamma dB/decade.
        let m1 = r.frequency_response(omega_mid / 10f64.sqrt()).unwrap().norm();
        let m2 = r.frequency_response(omega_mid * 10f64.sqrt()).unwrap().norm();
        let slope = 20.0 * (m2 / m1).log10();
        assert!((slope - 20.0 * -0.7).abs() < 0.5, "slope {slope}");
    }

    #[test]
    fn step_error_values() {
        assert_abs_diff_eq!(
            ora_step_error(10.0, -0.5, 1e-4).unwrap(),
            1.0 / 110.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(ora_step_error(0.0, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        // gamma < 0, omega_b -> 0: error -> 0.
        assert!(ora_step_error(10.0, -0.5, 1e-12).unwrap() < 1e-5);
        assert!(ora_step_error(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn split_order_cases() {
        assert_eq!(split_order(1.3).0, 1);
        assert_abs_diff_eq!(split_order(1.3).1, 0.3, epsilon = 1e-12);
        assert_eq!(split_order(-0.4).0, -1);
        assert_abs_diff_eq!(split_order(-0.4).1, 0.6, epsilon = 1e-12);
        assert_eq!(split_order(2.0), (2, 0.0));
    }

    #[test]
    fn suggest_order_band() {
        assert_eq!(suggest_order(1e-3, 1e3), 6);
        assert_eq!(suggest_order(1e-1, 1e1), 4);
    }

    #[test]
    fn leadlag_cancellation_is_static_gain() {
        // T1 = T2: pole-zero cancellation leaves the static gain K.
        let blk = foc_block(FocKind::FoLeadLag { k: 3.0, t1: 0.2, t2: 0.2 }).unwrap();
        // Steady state with x^(gamma) = 0 and x' = 0: A_c x + B_c u = 0,
        // y = C_c x. Solve for u = 1.
        use ndarray_linalg::Solve;
        let rhs = -blk.b_c.column(0).to_owned();
        let x = blk.a_c.solve(&rhs).unwrap();
        let y = blk.c_c.dot(&x)[0];
        assert_abs_diff_eq!(y, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn fopss_block_pattern() {
        let blk = fopss_block(5.0, 0.01, 0.22).unwrap();
        assert_eq!(blk.order(), 4);
        let e_cg = array![
            [0.22, 0.0, 0.0, 0.0],
            [0.01, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.22, 0.0],
            [0.0, 0.0, 0.01, 0.0]
        ];
        assert_eq!(blk.e_cg, e_cg);
        assert_eq!(blk.b_c[[0, 0]], 5.0);
        assert_eq!(blk.c_c[[0, 3]], 1.0);
        assert!(blk.e_c1.iter().all(|&x| x == 0.0));
    }

    fn ch4_closed_loop() -> FractionalClosedLoop {
        let plant = example_ch4();
        let blk = foc_block(FocKind::Fopi { kp: 7.0, ki: 10.0 }).unwrap();
        assemble_closed_loop(
            &plant.pencil.e,
            &plant.pencil.a,
            &plant.b,
            &plant.c,
            &plant.d,
            &blk,
            0.6,
        )
        .unwrap()
    }

    #[test]
    fn ch4_assembly_structure() {
        let cl = ch4_closed_loop();
        assert_eq!(cl.m.nrows(), 9);
        // M_gamma carries only the controller fractional row.
        assert_eq!(cl.m_gamma[[7, 7]], 1.0);
        assert_eq!(cl.m_gamma.iter().filter(|x| **x != 0.0).count(), 1);
        // Bottom-right of A_cl: D_c D - I_p = -1 (D = 0).
        assert_eq!(cl.a_cl[[8, 8]], -1.0);
        // Controller rows: B_c C in the plant columns, C_c in the output row.
        assert_eq!(cl.a_cl[[7, 5]], 10.0);
        assert_eq!(cl.a_cl[[8, 5]], 7.0);
        assert_eq!(cl.a_cl[[8, 7]], 1.0);
    }

    #[test]
    fn ch4_doubled_pencil_spectrum() {
        let cl = ch4_closed_loop();
        let report = fractional_stability(&cl).unwrap();
        assert_eq!(report.eigenvalues.len(), 11);
        assert_eq!(report.inf_multiplicity, 7);
        assert_abs_diff_eq!(report.threshold_rad, std::f64::consts::PI / 5.0, epsilon = 1e-12);
        let expect = [
            Complex64::new(1.816, 2.679),
            Complex64::new(-1.130, 0.0),
            Complex64::new(0.1840, 0.9962),
            Complex64::new(-0.0109, 1.751),
            Complex64::new(0.044, 1.940),
            Complex64::new(0.0211, 2.2004),
        ];
        for want in expect {
            assert!(
                report
                    .eigenvalues
                    .iter()
                    .any(|z| (z - want).norm() < 2e-3),
                "missing eigenvalue {want}"
            );
        }
    }

    #[test]
    fn zero_controller_preserves_plant_modes() {
        let plant = example_ch4();
        let blk = FocBlock {
            e_c1: Array2::zeros((1, 1)),
            e_cg: Array2::eye(1),
            a_c: Array2::from_elem((1, 1), -1.0),
            b_c: Array2::zeros((1, 1)),
            c_c: Array2::zeros((1, 1)),
            d_c: Array2::zeros((1, 1)),
        };
        let cl = assemble_closed_loop(
            &plant.pencil.e,
            &plant.pencil.a,
            &plant.b,
            &plant.c,
            &plant.d,
            &blk,
            0.5,
        )
        .unwrap();
        // With the loop open, the plant finite modes appear among the
        // closed-loop finite modes of the A_cl pencil restricted to x'.
        let p = MatrixPencil::new(cl.m.clone(), cl.a_cl.clone()).unwrap();
        let sol = p.eigen(false).unwrap();
        for want in [-5.0, -4.0, -3.0, -2.0, 1.0] {
            assert!(
                sol.finite_eigs
                    .iter()
                    .any(|z| (z - Complex64::new(want, 0.0)).norm() < 1e-6),
                "plant mode {want} lost"
            );
        }
    }

    #[test]
    fn threshold_symmetric_in_gamma() {
        let cl6 = ch4_closed_loop();
        let mut cl4 = cl6.clone();
        cl4.gamma = 0.4;
        cl4.beta = 0.6;
        let r6 = fractional_stability(&cl6).unwrap();
        let r4 = fractional_stability(&cl4).unwrap();
        assert_eq!(r6.stable, r4.stable);
        assert_abs_diff_eq!(r6.threshold_rad, r4.threshold_rad, epsilon = 1e-12);
    }

    #[test]
    fn single_negative_real_mode_is_stable() {
        // 1x1 loop whose doubled pencil has only negative real finite modes.
        let cl = FractionalClosedLoop {
            m: Array2::eye(1),
            m_gamma: Array2::zeros((1, 1)),
            a_cl: Array2::from_elem((1, 1), -1.0),
            gamma: 0.5,
            beta: 0.5,
        };
        let r = fractional_stability(&cl).unwrap();
        assert!(r.stable);
        assert!(r.args_rad.iter().all(|&a| a > r.threshold_rad));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(OraSpec::new(1.5, 1.0, 10.0, 4).is_err());
        assert!(OraSpec::new(0.5, 10.0, 1.0, 4).is_err());
        assert!(OraSpec::new(0.5, 1.0, 10.0, 0).is_err());
        let plant = example_ch4();
        let blk = foc_block(FocKind::Foi { ki: 1.0 }).unwrap();
        assert!(assemble_closed_loop(
            &plant.pencil.e,
            &plant.pencil.a,
            &plant.b,
            &plant.c,
            &plant.d,
            &blk,
            1.2
        )
        .is_err());
    }
}
