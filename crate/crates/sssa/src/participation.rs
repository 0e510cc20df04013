//! Participation factors: classical, generalized (singular pencils),
//! Jordan-chain (defective modes), output/algebraic variants, and the
//! analytic solution oracle for linear singular systems.
//!
//! For a semisimple finite mode `lambda_i` of a regular pencil `sE - A`
//! with eigenvectors normalized to `w_i E v_i = 1`, the participation of
//! variable `k` in mode `i` is
//!
//! ```text
//!   pi_{k,i} = (w_i E)_k v_{k,i}
//! ```
//!
//! which reduces to the classical `w_{i,k} v_{k,i}` when `E = I`, sums to 1
//! over `k` per mode, and equals the transfer-function residue taken with
//! unit basis input/output vectors. Defective modes require Jordan chains;
//! their participation is a polynomial in `t` (secular terms of `t^p e^{lambda t}`).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pencil::{cluster_multiplicities, EigenSolution, MatrixPencil};

/// Largest pencil dimension for which Jordan chains are computed internally.
pub const JORDAN_DIM_MAX: usize = 20;

/// Residual tolerance for accepting a Jordan chain.
pub const CHAIN_TOL: f64 = 1e-8;

/// Participation matrix: rows are variables, columns are modes.
#[derive(Debug, Clone)]
pub struct ParticipationMatrix {
    /// Constant (t = 0) participation factors.
    pub values: Array2<Complex64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Eigenvalue of each column.
    pub eigenvalues: Vec<Complex64>,
    /// Per-entry polynomial coefficients in `t` for Jordan-chain PFs:
    /// `time_poly[p]` is the coefficient matrix of `t^p`; `time_poly[0]`
    /// equals `values`. `None` for semisimple participation.
    pub time_poly: Option<Vec<Array2<Complex64>>>,
}

impl ParticipationMatrix {
    /// Per-column sums (1 per mode for semisimple state PFs).
    pub fn column_sums(&self) -> Vec<Complex64> {
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().sum())
            .collect()
    }

    /// Magnitudes |pi| of the constant terms.
    pub fn magnitudes(&self) -> Array2<f64> {
        self.values.mapv(|z| z.norm())
    }

    /// Optional per-column normalization by the entry of largest magnitude.
    pub fn max_normalized(&self) -> Array2<f64> {
        let mut m = self.magnitudes();
        for mut col in m.columns_mut() {
            let mx = col.iter().cloned().fold(0.0f64, f64::max);
            if mx > 0.0 {
                col.mapv_inplace(|x| x / mx);
            }
        }
        m
    }

    /// Optional per-row Euclidean-norm scaling (reporting aid, off the
    /// default path): each row is divided by its Euclidean norm.
    pub fn row_euclidean_scaled(&self) -> Array2<f64> {
        let mut m = self.magnitudes();
        for mut row in m.rows_mut() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
        }
        m
    }
}

fn default_labels(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn eig_labels(eigs: &[Complex64]) -> Vec<String> {
    eigs.iter()
        .enumerate()
        .map(|(i, z)| format!("lambda{} ({:.4}{:+.4}j)", i + 1, z.re, z.im))
        .collect()
}

// ---------------------------------------------------------------------------
// Classical PFs and residues
// ---------------------------------------------------------------------------

/// Classical participation matrix of a state matrix with distinct eigenvalues:
/// `pi_{k,i} = w_{i,k} v_{k,i}` with `W = V^{-1}` (so `w_i v_i = 1`).
pub fn classical_pf(a_s: &Array2<f64>) -> Result<ParticipationMatrix> {
    let n = a_s.nrows();
    if a_s.ncols() != n {
        return Err(Error::DimensionMismatch("state matrix must be square".into()));
    }
    let (eigs, v) = a_s
        .eig()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e}")))?;
    let eig_vec: Vec<Complex64> = eigs.to_vec();
    if cluster_multiplicities(&eig_vec).iter().any(|(_, m)| *m > 1) {
        return Err(Error::Precondition(
            "repeated eigenvalues detected; classical participation factors are \
             undefined — use generalized_pf with Jordan chains"
                .into(),
        ));
    }
    let w = v
        .inv()
        .map_err(|e| Error::Numerical(format!("eigenvector matrix is singular: {e}")))?;
    let values = Array2::from_shape_fn((n, n), |(k, i)| w[[i, k]] * v[[k, i]]);
    Ok(ParticipationMatrix {
        values,
        row_labels: default_labels("x", n),
        col_labels: eig_labels(&eig_vec),
        eigenvalues: eig_vec,
        time_poly: None,
    })
}

/// Transfer-function residue `R_i = c v_i w_i b` of a simple eigenvalue of
/// `A_s` for the input/output pair `(b, c)`. With `b = e_k`, `c = e_k^T`
/// this is exactly the classical participation factor `pi_{k,i}`.
pub fn residue(
    a_s: &Array2<f64>,
    b: &Array1<f64>,
    c: &Array1<f64>,
    lambda: Complex64,
) -> Result<Complex64> {
    let n = a_s.nrows();
    if b.len() != n || c.len() != n {
        return Err(Error::DimensionMismatch(
            "b and c must have the state dimension".into(),
        ));
    }
    let (eigs, v) = a_s
        .eig()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e}")))?;
    let idx = eigs
        .iter()
        .position(|z| (z - lambda).norm() <= 1e-6 * lambda.norm().max(1.0))
        .ok_or_else(|| {
            Error::Precondition(format!("{lambda} is not an eigenvalue of the state matrix"))
        })?;
    let matches = eigs
        .iter()
        .filter(|z| (*z - lambda).norm() <= 1e-6 * lambda.norm().max(1.0))
        .count();
    if matches > 1 {
        return Err(Error::Precondition(format!(
            "{lambda} is a repeated eigenvalue; the residue formula requires a simple mode"
        )));
    }
    let w = v
        .inv()
        .map_err(|e| Error::Numerical(format!("eigenvector matrix is singular: {e}")))?;
    let bc = b.mapv(|x| Complex64::new(x, 0.0));
    let cc = c.mapv(|x| Complex64::new(x, 0.0));
    let wi_b: Complex64 = w.row(idx).iter().zip(bc.iter()).map(|(w, b)| w * b).sum();
    let c_vi: Complex64 = cc.iter().zip(v.column(idx).iter()).map(|(c, v)| c * v).sum();
    Ok(c_vi * wi_b)
}

// ---------------------------------------------------------------------------
// Generalized PFs (singular pencils, semisimple modes)
// ---------------------------------------------------------------------------

/// Generalized participation matrix of a regular pencil from a (possibly
/// partial) eigensolution with left vectors, `pi_{k,i} = (w_i E)_k v_{k,i}`.
///
/// Modes must be semisimple: a defective mode is detected through the
/// breakdown of the `w_i E v_i = 1` normalization and rejected — use the
/// Jordan-chain interface for those.
pub fn generalized_pf(pencil: &MatrixPencil, sol: &EigenSolution) -> Result<ParticipationMatrix> {
    let r = pencil.r();
    let kappa = sol.nu;
    if sol.left_vecs.nrows() != kappa {
        return Err(Error::Precondition(
            "eigensolution lacks left eigenvectors; recompute with want_left".into(),
        ));
    }
    let mut values = Array2::<Complex64>::zeros((r, kappa));
    for i in 0..kappa {
        let w = sol.left_vecs.row(i);
        let v = sol.right_vecs.column(i);
        let wev = pencil.bilinear(&w.to_owned(), &v.to_owned());
        if (wev - Complex64::new(1.0, 0.0)).norm() > 1e-6 {
            return Err(Error::Precondition(format!(
                "mode {} ({}) is defective (w E v = {wev}); supply Jordan chains via jordan_pf",
                i + 1,
                sol.finite_eigs[i]
            )));
        }
        // (w_i E)_k v_{k,i}
        for k in 0..r {
            let we_k: Complex64 = (0..r)
                .map(|j| w[j] * Complex64::new(pencil.e[[j, k]], 0.0))
                .sum();
            values[[k, i]] = we_k * v[k];
        }
    }
    Ok(ParticipationMatrix {
        values,
        row_labels: default_labels("x", r),
        col_labels: eig_labels(&sol.finite_eigs),
        eigenvalues: sol.finite_eigs.clone(),
        time_poly: None,
    })
}

// ---------------------------------------------------------------------------
// Jordan chains
// ---------------------------------------------------------------------------

/// Right and left Jordan chains of one defective finite eigenvalue.
///
/// `v[j]` satisfies `(A - lambda E) v[j] = E v[j-1]` (with `v[-1] = 0`),
/// `w[j]` the left analog; the chains are cross-normalized so that
/// `w[i] E v[j] = 1` when `i + j = beta + 1` and `0` otherwise.
#[derive(Debug, Clone)]
pub struct JordanChains {
    pub lambda: Complex64,
    pub v: Vec<Array1<Complex64>>,
    pub w: Vec<Array1<Complex64>>,
}

impl JordanChains {
    pub fn beta(&self) -> usize {
        self.v.len()
    }

    /// Largest relative residual of the chain relations.
    pub fn residual(&self, pencil: &MatrixPencil) -> f64 {
        let r = pencil.r();
        let m = Array2::from_shape_fn((r, r), |(i, j)| {
            Complex64::new(pencil.a[[i, j]], 0.0) - self.lambda * pencil.e[[i, j]]
        });
        let e_c = pencil.e.mapv(|x| Complex64::new(x, 0.0));
        let scale = (crate::participation::mat_norm(&m) + crate::participation::mat_norm(&e_c))
            .max(1e-300);
        let mut worst = 0.0f64;
        for j in 0..self.beta() {
            let rhs_v = if j == 0 {
                Array1::zeros(r)
            } else {
                e_c.dot(&self.v[j - 1])
            };
            let res_v = &m.dot(&self.v[j]) - &rhs_v;
            let rhs_w = if j == 0 {
                Array1::zeros(r)
            } else {
                e_c.t().dot(&self.w[j - 1])
            };
            let res_w = &m.t().dot(&self.w[j]) - &rhs_w;
            let vn = vec_norm(&self.v[j]).max(1e-300);
            let wn = vec_norm(&self.w[j]).max(1e-300);
            worst = worst
                .max(vec_norm(&res_v) / (scale * vn))
                .max(vec_norm(&res_w) / (scale * wn));
        }
        worst
    }
}

pub(crate) fn mat_norm(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Null-space vector (smallest right singular vector) of a complex matrix.
fn null_vector(m: &Array2<Complex64>, tol: f64) -> Result<Array1<Complex64>> {
    let (_, s, vt) = m
        .svd(false, true)
        .map_err(|e| Error::Numerical(format!("SVD failed: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let smin = *s.last().expect("nonempty singular spectrum");
    let smax = s[0];
    if smin > tol * smax.max(1.0) {
        return Err(Error::Precondition(format!(
            "matrix has no null space at tolerance {tol:.1e} (sigma_min = {smin:.3e})"
        )));
    }
    Ok(vt.row(vt.nrows() - 1).mapv(|z| z.conj()))
}

/// Minimal-norm least-squares solution of `M x = b` via SVD with cutoff.
fn lstsq_min_norm(m: &Array2<Complex64>, b: &Array1<Complex64>, tol: f64) -> Result<Array1<Complex64>> {
    let (u, s, vt) = m
        .svd(true, true)
        .map_err(|e| Error::Numerical(format!("SVD failed: {e}")))?;
    let u = u.expect("requested left singular vectors");
    let vt = vt.expect("requested right singular vectors");
    let smax = s[0].max(1e-300);
    let mut x = Array1::<Complex64>::zeros(m.ncols());
    for (i, &sv) in s.iter().enumerate() {
        if sv <= tol * smax {
            continue;
        }
        let ui_b: Complex64 = u.column(i).iter().zip(b.iter()).map(|(u, b)| u.conj() * b).sum();
        let coef = ui_b / sv;
        for (k, xv) in x.iter_mut().enumerate() {
            *xv += coef * vt[[i, k]].conj();
        }
    }
    Ok(x)
}

/// Compute the Jordan chains of a defective eigenvalue of a regular pencil.
///
/// Restricted to geometric multiplicity 1 (a single Jordan block) and
/// pencil dimensions up to [`JORDAN_DIM_MAX`]; `beta` is the algebraic
/// multiplicity of `lambda`. The recursion solves
/// `(A - lambda E) v[j] = E v[j-1]` by minimal-norm least squares and then
/// cross-normalizes both chains. The Gram matrix `G_{ij} = w[i] E v[j]` of
/// raw chains is constant along anti-diagonals (a consequence of the chain
/// relations), so normalization reduces to one scaling plus a sequence of
/// shifts `w[i] += alpha_d w[i-d]`.
pub fn compute_jordan_chains(
    pencil: &MatrixPencil,
    lambda: Complex64,
    beta: usize,
) -> Result<JordanChains> {
    let r = pencil.r();
    if r > JORDAN_DIM_MAX {
        return Err(Error::Precondition(format!(
            "Jordan chain computation is limited to dimension {JORDAN_DIM_MAX}, got {r}"
        )));
    }
    if beta == 0 {
        return Err(Error::InvalidInput("chain length must be at least 1".into()));
    }
    let m = Array2::from_shape_fn((r, r), |(i, j)| {
        Complex64::new(pencil.a[[i, j]], 0.0) - lambda * pencil.e[[i, j]]
    });
    let e_c = pencil.e.mapv(|x| Complex64::new(x, 0.0));

    let mut v: Vec<Array1<Complex64>> = vec![null_vector(&m, CHAIN_TOL)?];
    let mt = m.t().mapv(|z| z);
    let mut w: Vec<Array1<Complex64>> = vec![null_vector(&mt, CHAIN_TOL)?];
    for j in 1..beta {
        let rhs_v = e_c.dot(&v[j - 1]);
        v.push(lstsq_min_norm(&m, &rhs_v, CHAIN_TOL)?);
        let rhs_w = e_c.t().dot(&w[j - 1]);
        w.push(lstsq_min_norm(&mt, &rhs_w, CHAIN_TOL)?);
    }

    // Gram value on the main anti-diagonal (i + j = beta + 1); all entries
    // there coincide, so use w[beta] E v[1].
    let g = |wv: &Array1<Complex64>, vv: &Array1<Complex64>| -> Complex64 {
        wv.dot(&e_c.dot(vv))
    };
    let pivot = g(&w[beta - 1], &v[0]);
    if pivot.norm() <= 1e-12 {
        return Err(Error::Numerical(format!(
            "chain normalization breakdown: w[beta] E v[1] = {pivot} (wrong beta \
             or geometric multiplicity > 1?)"
        )));
    }
    for wv in w.iter_mut() {
        wv.mapv_inplace(|z| z / pivot);
    }
    // Zero the sub-anti-diagonals: for offset d, alpha_d = w[beta] E v[1+d]
    // after previous corrections; shift the whole w chain by -alpha_d.
    for d in 1..beta {
        let alpha = g(&w[beta - 1], &v[d]);
        if alpha.norm() == 0.0 {
            continue;
        }
        let snapshot: Vec<Array1<Complex64>> = w.clone();
        for i in d..beta {
            let corr = snapshot[i - d].mapv(|z| z * alpha);
            w[i] = &w[i] - &corr;
        }
    }

    let chains = JordanChains { lambda, v, w };
    let res = chains.residual(pencil);
    if res > CHAIN_TOL {
        return Err(Error::Numerical(format!(
            "Jordan chain residual {res:.3e} exceeds tolerance {CHAIN_TOL:.0e}"
        )));
    }
    Ok(chains)
}

/// Participation of every variable in one defective mode, as a polynomial
/// in `t` per variable.
///
/// With chains normalized as in [`compute_jordan_chains`], the solution of
/// `E x' = A x` contributed by the block is
/// `x(t) = e^{lambda t} sum_j v[j] sum_{l >= j} t^{l-j}/(l-j)! (w[beta+1-l] E x0)`,
/// so the participation polynomial of variable `k` (unit initial condition
/// on `x_k`, observing `x_k`) is
/// `pi_k(t) = sum_j sum_{l >= j} v_k[j] (w[beta+1-l] E)_k t^{l-j}/(l-j)!`.
pub fn jordan_pf(pencil: &MatrixPencil, chains: &JordanChains) -> Result<ParticipationMatrix> {
    let r = pencil.r();
    let beta = chains.beta();
    let res = chains.residual(pencil);
    if res > CHAIN_TOL {
        return Err(Error::Precondition(format!(
            "supplied Jordan chains have residual {res:.3e} above tolerance {CHAIN_TOL:.0e}"
        )));
    }
    let e_c = pencil.e.mapv(|x| Complex64::new(x, 0.0));
    // (w[i] E) rows, i = 1..beta (0-based index i-1).
    let we: Vec<Array1<Complex64>> = chains.w.iter().map(|wv| e_c.t().dot(wv)).collect();

    let mut polys: Vec<Array2<Complex64>> = vec![Array2::zeros((r, 1)); beta];
    let mut factorial = vec![1.0f64; beta];
    for p in 1..beta {
        factorial[p] = factorial[p - 1] * p as f64;
    }
    for k in 0..r {
        for j in 1..=beta {
            for l in j..=beta {
                let p = l - j;
                // w[beta + 1 - l] has 0-based index beta - l.
                let coef = chains.v[j - 1][k] * we[beta - l][k] / factorial[p];
                polys[p][[k, 0]] += coef;
            }
        }
    }
    let values = polys[0].clone();
    Ok(ParticipationMatrix {
        values,
        row_labels: default_labels("x", r),
        col_labels: vec![format!(
            "lambda ({:.4}{:+.4}j), beta={beta}",
            chains.lambda.re, chains.lambda.im
        )],
        eigenvalues: vec![chains.lambda],
        time_poly: Some(polys),
    })
}

// ---------------------------------------------------------------------------
// Output participation
// ---------------------------------------------------------------------------

/// Output participation `Pi_hat = C Pi_x` for an output matrix `C` acting on
/// state participation rows (specializations: `C = -g_y^{-1} g_x` for
/// algebraic variables, `C = A_s` for rates of change, single-row parameter
/// constructions for parameter participation).
pub fn output_pf(pf: &ParticipationMatrix, c: &Array2<f64>) -> Result<ParticipationMatrix> {
    if c.ncols() != pf.values.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "output matrix has {} columns but the participation matrix has {} rows",
            c.ncols(),
            pf.values.nrows()
        )));
    }
    let cc = c.mapv(|x| Complex64::new(x, 0.0));
    let time_poly = pf
        .time_poly
        .as_ref()
        .map(|polys| polys.iter().map(|p| cc.dot(p)).collect());
    Ok(ParticipationMatrix {
        values: cc.dot(&pf.values),
        row_labels: default_labels("w", c.nrows()),
        col_labels: pf.col_labels.clone(),
        eigenvalues: pf.eigenvalues.clone(),
        time_poly,
    })
}

// ---------------------------------------------------------------------------
// Analytic solution of linear singular systems
// ---------------------------------------------------------------------------

/// Trajectory of `E x' = A x` evaluated from the modal expansion.
#[derive(Debug, Clone)]
pub struct SingularSolution {
    pub times: Vec<f64>,
    /// `r x len(times)`; column j is `x(times[j])`.
    pub states: Array2<f64>,
    /// Whether `x0` was consistent (inside the span of the finite modes).
    pub consistent: bool,
    /// `||x(0) - x0||_2 / max(1, ||x0||_2)` of the projected solution.
    pub projection_error: f64,
}

/// Evaluate `x(t) = sum_i v_i (w_i E x0) e^{lambda_i t}` for a regular
/// pencil with semisimple finite modes.
///
/// An inconsistent initial condition (components outside the finite-mode
/// subspace) is reported through `consistent = false` and the projection
/// error; the projected solution is still returned.
pub fn solve_linear_singular(
    pencil: &MatrixPencil,
    x0: &Array1<f64>,
    t_points: &[f64],
) -> Result<SingularSolution> {
    let r = pencil.r();
    if x0.len() != r {
        return Err(Error::DimensionMismatch(
            "initial condition length must equal the pencil dimension".into(),
        ));
    }
    let sol = pencil.eigen(true)?;
    let e_c = pencil.e.mapv(|x| Complex64::new(x, 0.0));
    let x0c = x0.mapv(|x| Complex64::new(x, 0.0));
    let ex0 = e_c.dot(&x0c);

    // Modal amplitudes a_i = w_i E x0 (requires semisimple modes).
    let mut amps = Vec::with_capacity(sol.nu);
    for i in 0..sol.nu {
        let w = sol.left_vecs.row(i).to_owned();
        let v = sol.right_vecs.column(i).to_owned();
        let wev = pencil.bilinear(&w, &v);
        if (wev - Complex64::new(1.0, 0.0)).norm() > 1e-6 {
            return Err(Error::Precondition(format!(
                "mode {} is defective; the semisimple solution formula does not apply",
                sol.finite_eigs[i]
            )));
        }
        amps.push(w.dot(&ex0));
    }

    let mut states = Array2::<f64>::zeros((r, t_points.len()));
    for (j, &t) in t_points.iter().enumerate() {
        let mut x = Array1::<Complex64>::zeros(r);
        for i in 0..sol.nu {
            let ph = (sol.finite_eigs[i] * t).exp() * amps[i];
            for k in 0..r {
                x[k] += sol.right_vecs[[k, i]] * ph;
            }
        }
        for k in 0..r {
            states[[k, j]] = x[k].re;
        }
    }

    // Consistency: x(0) of the expansion vs the requested x0.
    let mut x0_proj = Array1::<Complex64>::zeros(r);
    for i in 0..sol.nu {
        for k in 0..r {
            x0_proj[k] += sol.right_vecs[[k, i]] * amps[i];
        }
    }
    let diff = &x0_proj - &x0c;
    let perr = vec_norm(&diff) / x0.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    Ok(SingularSolution {
        times: t_points.to_vec(),
        states,
        consistent: perr <= 1e-8,
        projection_error: perr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;
    use crate::dae::example_ch3;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn classical_pf_diagonal_identity() {
        let pf = classical_pf(&array![[-1.0, 0.0], [0.0, -2.0]]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                let expect = if (pf.eigenvalues[i].re + (k as f64 + 1.0)).abs() < 1e-9 {
                    1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(pf.values[[k, i]].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(pf.values[[k, i]].im, 0.0, epsilon = 1e-12);
            }
        }
        // Single state.
        let pf1 = classical_pf(&array![[-1.0]]).unwrap();
        assert_abs_diff_eq!(pf1.values[[0, 0]].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn classical_pf_columns_sum_to_one() {
        let a = array![
            [-1.0, 0.5, 0.2],
            [0.1, -2.0, 0.4],
            [0.3, 0.2, -3.0]
        ];
        let pf = classical_pf(&a).unwrap();
        for s in pf.column_sums() {
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn classical_pf_rejects_repeated() {
        let err = classical_pf(&array![[-2.0, 1.0], [0.0, -2.0]]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn residue_equals_pf() {
        let a = array![
            [-1.0, 0.4, 0.0, 0.2],
            [0.0, -2.0, 0.3, 0.0],
            [0.1, 0.0, -3.0, 0.1],
            [0.0, 0.2, 0.0, -4.0]
        ];
        let pf = classical_pf(&a).unwrap();
        for k in 0..4 {
            let mut b = Array1::zeros(4);
            b[k] = 1.0;
            for i in 0..4 {
                let r = residue(&a, &b, &b, pf.eigenvalues[i]).unwrap();
                assert!((r - pf.values[[k, i]]).norm() < 1e-12);
            }
        }
        // Cross term on a diagonal matrix is zero.
        let d = array![[-1.0, 0.0], [0.0, -2.0]];
        let b = array![1.0, 0.0];
        let c = array![0.0, 1.0];
        let r = residue(&d, &b, &c, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn generalized_reduces_to_classical_for_identity_e() {
        let a = array![[-1.0, 0.3], [0.2, -2.0]];
        let p = MatrixPencil::new(Array2::eye(2), a.clone()).unwrap();
        let sol = p.eigen(true).unwrap();
        let gpf = generalized_pf(&p, &sol).unwrap();
        let cpf = classical_pf(&a).unwrap();
        for i in 0..2 {
            // Match columns by eigenvalue.
            let j = cpf
                .eigenvalues
                .iter()
                .position(|z| (z - gpf.eigenvalues[i]).norm() < 1e-8)
                .unwrap();
            for k in 0..2 {
                assert!((gpf.values[[k, i]] - cpf.values[[k, j]]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn ch3_semisimple_column() {
        // The lambda = -3 column of the 5x5 example: (0, 2/3, 1/3, 0, 0).
        let p = example_ch3();
        let sol = p.eigen(true).unwrap();
        let i = sol
            .finite_eigs
            .iter()
            .position(|z| (z - Complex64::new(-3.0, 0.0)).norm() < 1e-6)
            .unwrap();
        // Build a partial solution holding only the semisimple mode.
        let partial = EigenSolution {
            finite_eigs: vec![sol.finite_eigs[i]],
            right_vecs: sol
                .right_vecs
                .column(i)
                .to_owned()
                .insert_axis(Axis(1)),
            left_vecs: sol.left_vecs.row(i).to_owned().insert_axis(Axis(0)),
            inf_multiplicity: sol.inf_multiplicity,
            nu: 1,
        };
        let pf = generalized_pf(&p, &partial).unwrap();
        let expect = [0.0, 0.6667, 0.3333, 0.0, 0.0];
        for k in 0..5 {
            assert_abs_diff_eq!(pf.values[[k, 0]].re, expect[k], epsilon = 1e-3);
            assert_abs_diff_eq!(pf.values[[k, 0]].im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn jordan_chain_computation_and_pf() {
        let p = example_ch3();
        let lam = Complex64::new(-2.0, 0.0);
        let chains = compute_jordan_chains(&p, lam, 2).unwrap();
        assert!(chains.residual(&p) < 1e-10);
        // Cross-normalization: Gram anti-diagonal = 1, corner = 0.
        let e_c = p.e.mapv(|x| Complex64::new(x, 0.0));
        let g21 = chains.w[1].dot(&e_c.dot(&chains.v[0]));
        let g12 = chains.w[0].dot(&e_c.dot(&chains.v[1]));
        let g22 = chains.w[1].dot(&e_c.dot(&chains.v[1]));
        let g11 = chains.w[0].dot(&e_c.dot(&chains.v[0]));
        assert!((g21 - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((g12 - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(g22.norm() < 1e-9);
        assert!(g11.norm() < 1e-9);

        let pf = jordan_pf(&p, &chains).unwrap();
        // Constant terms of the dynamically consistent expansion: (1, 1/3, 2/3, 0, 0).
        let expect = [1.0, 1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0];
        for k in 0..5 {
            assert_abs_diff_eq!(pf.values[[k, 0]].re, expect[k], epsilon = 1e-8);
        }
        // The secular (t) coefficients v1_k (w1 E)_k vanish identically here.
        let t_coefs = &pf.time_poly.as_ref().unwrap()[1];
        for k in 0..5 {
            assert!(t_coefs[[k, 0]].norm() < 1e-9);
        }
    }

    #[test]
    fn jordan_collapses_to_semisimple_for_beta_one() {
        let p = example_ch3();
        let lam = Complex64::new(-3.0, 0.0);
        let chains = compute_jordan_chains(&p, lam, 1).unwrap();
        let pf = jordan_pf(&p, &chains).unwrap();
        let expect = [0.0, 2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];
        for k in 0..5 {
            assert_abs_diff_eq!(pf.values[[k, 0]].re, expect[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn output_pf_linearity_and_zero_row() {
        let a = array![[-1.0, 0.3], [0.2, -2.0]];
        let pf = classical_pf(&a).unwrap();
        let c1 = array![[1.0, 0.0], [0.0, 0.0]];
        let c2 = array![[0.0, 1.0], [0.0, 0.0]];
        let combo = output_pf(&pf, &(2.0 * &c1 + 3.0 * &c2)).unwrap();
        let lhs1 = output_pf(&pf, &c1).unwrap();
        let lhs2 = output_pf(&pf, &c2).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                let want = lhs1.values[[k, i]] * 2.0 + lhs2.values[[k, i]] * 3.0;
                assert!((combo.values[[k, i]] - want).norm() < 1e-12);
            }
        }
        // Zero row -> zero PF in every mode.
        for i in 0..2 {
            assert!(combo.values[[1, i]].norm() < 1e-14);
        }
        // C = I preserves the PF matrix.
        let id = output_pf(&pf, &Array2::eye(2)).unwrap();
        assert_eq!(id.values, pf.values);
    }

    #[test]
    fn singular_solution_decoupled() {
        let p = MatrixPencil::new(Array2::eye(2), array![[-1.0, 0.0], [0.0, -2.0]]).unwrap();
        let x0 = array![1.0, 1.0];
        let sol = solve_linear_singular(&p, &x0, &[0.0, 1.0]).unwrap();
        assert!(sol.consistent);
        assert_abs_diff_eq!(sol.states[[0, 0]], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.states[[1, 0]], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.states[[0, 1]], (-1.0f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(sol.states[[1, 1]], (-2.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn singular_solution_flags_inconsistent_x0() {
        // 0 = x + y constraint: x0 = (1, 1) violates it.
        let e = array![[1.0, 0.0], [0.0, 0.0]];
        let a = array![[-1.0, 0.0], [1.0, 1.0]];
        let p = MatrixPencil::new(e, a).unwrap();
        let sol = solve_linear_singular(&p, &array![1.0, 1.0], &[0.0]).unwrap();
        assert!(!sol.consistent);
        assert!(sol.projection_error > 0.1);
    }
}
