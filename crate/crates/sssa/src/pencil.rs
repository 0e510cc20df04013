//! Matrix pencils, their eigenstructure, spectral transforms, and
//! per-eigenvalue stability metrics.
//!
//! The central object is the regular pencil `sE - A` of a linear
//! (descriptor) system `E x' = A x`. Its spectrum splits into `nu` finite
//! eigenvalues and an infinite eigenvalue of multiplicity
//! `mu = r - deg det(sE - A)` contributed by a singular `E`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Determinant, Eig, Inverse, Norm};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative cutoff that classifies a shift-inverted eigenvalue as infinite.
const TOL_INF: f64 = 1e-10;

/// Eigenvalues with `|theta|` below this (relative) level are "suspect":
/// they sit in the range where Jordan structure at infinity perturbs into
/// huge finite values (`~eps^{1/index}`), and are kept only when an
/// independent second shift reproduces them.
const TOL_SUSPECT: f64 = 1e-6;

/// Relative clustering tolerance used when grouping repeated eigenvalues.
const TOL_CLUSTER: f64 = 1e-6;

/// A square real matrix pair `(E, A)` representing the pencil `sE - A`.
#[derive(Debug, Clone)]
pub struct MatrixPencil {
    pub e: Array2<f64>,
    pub a: Array2<f64>,
}

/// Finite eigenstructure of a regular pencil.
///
/// `right_vecs` holds the right eigenvectors `v_i` as columns, `left_vecs`
/// the left eigenvectors `w_i` as rows (`w_i (lambda_i E - A) = 0`).
/// Eigenpairs are normalized so that `w_i E v_i = 1` whenever that product
/// is not negligible; `v_i` always has unit Euclidean norm.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub finite_eigs: Vec<Complex64>,
    /// r x nu; column i is the right eigenvector of `finite_eigs[i]`.
    pub right_vecs: Array2<Complex64>,
    /// nu x r; row i is the left eigenvector of `finite_eigs[i]`.
    /// Empty (0 x r) when left vectors were not requested.
    pub left_vecs: Array2<Complex64>,
    /// Multiplicity of the infinite eigenvalue, `mu = r - nu`.
    pub inf_multiplicity: usize,
    /// Number of finite eigenvalues.
    pub nu: usize,
}

/// Coefficients of the Möbius (linear spectral) transform
/// `s = (a z + b) / (c z + d)`, `ad - bc != 0`.
#[derive(Debug, Clone, Copy)]
pub struct MoebiusCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MoebiusCoeffs {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() <= 1e-14 * (a.norm() * d.norm() + b.norm() * c.norm()).max(1e-300) {
            return Err(Error::InvalidInput(format!(
                "degenerate Möbius coefficients: ad - bc = {det}"
            )));
        }
        Ok(MoebiusCoeffs { a, b, c, d })
    }

    fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        MoebiusCoeffs {
            a: Complex64::new(a, 0.0),
            b: Complex64::new(b, 0.0),
            c: Complex64::new(c, 0.0),
            d: Complex64::new(d, 0.0),
        }
    }

    /// Identity transform: the prime spectrum is left unchanged.
    pub fn prime() -> Self {
        Self::real(-1.0, 0.0, 0.0, -1.0)
    }

    /// Dual (invert) transform `s = 1/z`, swapping zero and infinity.
    pub fn invert() -> Self {
        Self::real(0.0, 1.0, 1.0, 0.0)
    }

    /// Shift & invert about `sigma`: `s = sigma + 1/z`.
    pub fn shift_invert(sigma: f64) -> Self {
        Self::real(sigma, 1.0, 1.0, 0.0)
    }

    /// Cayley transform with pole `sigma`: `s = sigma (z - 1)/(z + 1)`.
    pub fn cayley(sigma: f64) -> Self {
        Self::real(sigma, -sigma, 1.0, 1.0)
    }

    /// Generalized Cayley transform `s = (sigma z - nu_c)/(z + 1)`.
    pub fn generalized_cayley(sigma: f64, nu_c: f64) -> Self {
        Self::real(sigma, -nu_c, 1.0, 1.0)
    }

    /// Map an eigenvalue `z` of the transformed pencil back to the prime
    /// spectrum: `s = (a z + b)/(c z + d)`. Returns `None` when `z` hits the
    /// pole of the map (prime eigenvalue at infinity).
    pub fn map_back(&self, z: Complex64) -> Option<Complex64> {
        let den = self.c * z + self.d;
        let num = self.a * z + self.b;
        if den.norm() <= 1e-14 * num.norm().max(1.0) {
            None
        } else {
            Some(num / den)
        }
    }
}

impl MatrixPencil {
    /// Build a pencil from a square pair of identical dimension.
    pub fn new(e: Array2<f64>, a: Array2<f64>) -> Result<Self> {
        if e.nrows() != e.ncols() || a.nrows() != a.ncols() || e.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "pencil matrices must be square and equally sized, got E {}x{}, A {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if e.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "pencil dimension must be at least 1".into(),
            ));
        }
        Ok(MatrixPencil { e, a })
    }

    /// Pencil dimension `r`.
    pub fn r(&self) -> usize {
        self.e.nrows()
    }

    fn complex_at(&self, s: Complex64) -> Array2<Complex64> {
        let r = self.r();
        Array2::from_shape_fn((r, r), |(i, j)| s * self.e[[i, j]] - self.a[[i, j]])
    }

    /// Probe regularity: `det(sE - A)` is not identically zero.
    ///
    /// Evaluates the determinant at `probes >= r + 1` random complex shifts
    /// drawn from a seeded generator; since the determinant is a polynomial
    /// of degree at most `r`, a nonzero value at any probe certifies
    /// regularity, and `r + 1` zero values certify the zero polynomial up to
    /// roundoff. The determinant is judged nonzero when it exceeds
    /// `1e-12` times the product of row norms of the probed matrix
    /// (a Hadamard-style scale).
    pub fn is_regular(&self, probes: usize, seed: u64) -> Result<bool> {
        let r = self.r();
        if probes < r + 1 {
            return Err(Error::Precondition(format!(
                "regularity probing requires at least r + 1 = {} probes, got {probes}",
                r + 1
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = self.e.norm_l2().max(self.a.norm_l2()).max(1.0);
        for _ in 0..probes {
            let s = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
            let m = self.complex_at(s);
            let mut hadamard = 1.0f64;
            for row in m.rows() {
                hadamard *= row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            }
            if let Ok(det) = m.det() {
                if det.norm() > 1e-12 * hadamard {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Solve the generalized eigenvalue problem of the pencil.
    ///
    /// All `nu` finite eigenvalues are returned together with right (and
    /// optionally left) eigenvectors, plus the multiplicity `mu` of the
    /// infinite eigenvalue, `nu + mu = r`.
    ///
    /// The pencil is reduced by shift-and-invert: with a deterministic
    /// random shift `s0` for which `s0 E - A` is invertible, the standard
    /// complex eigenproblem of `B = (s0 E - A)^{-1} E` is solved; each
    /// eigenvalue `theta` of `B` maps to the pencil eigenvalue
    /// `lambda = s0 - 1/theta`, and `theta ~ 0` flags the infinite
    /// eigenvalue. Right eigenvectors carry over unchanged; left
    /// eigenvectors `u` of `B` map through `w = u (s0 E - A)^{-1}`.
    pub fn eigen(&self, want_left: bool) -> Result<EigenSolution> {
        let r = self.r();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ea1);
        let scale = self.e.norm_l2().max(self.a.norm_l2()).max(1.0) / self.e.norm_l2().max(1e-300);

        let mut chosen: Option<(Complex64, Array2<Complex64>)> = None;
        for _ in 0..16 {
            let s0 =
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.25..1.0)) * scale * 2.0;
            let k = self.complex_at(s0);
            match k.inv() {
                Ok(kinv) => {
                    chosen = Some((s0, kinv));
                    break;
                }
                Err(_) => continue,
            }
        }
        let (s0, kinv) = chosen.ok_or_else(|| {
            Error::NonRegular("could not find an invertible shift s0 E - A".into())
        })?;

        let e_c = self.e.mapv(|x| Complex64::new(x, 0.0));
        let b = kinv.dot(&e_c);
        let (thetas, vecs) = b
            .eig()
            .map_err(|err| Error::Numerical(format!("eigensolver failed: {err}")))?;

        // Classify each theta; theta ~ 0 corresponds to the infinite eigenvalue.
        // The cutoff is the scale-invariant form of the generalized-Schur rule
        // |beta| <= tol (|alpha| + |beta|) for lambda = alpha/beta. Marginal
        // cases (suspects) are resolved by a second, independent shift.
        let mut finite: Vec<(Complex64, Array1<Complex64>, bool)> = Vec::new();
        for (i, &theta) in thetas.iter().enumerate() {
            let alpha = s0 * theta - Complex64::new(1.0, 0.0);
            let denom = alpha.norm() + theta.norm();
            if theta.norm() <= TOL_INF * denom {
                continue; // infinite eigenvalue
            }
            let lambda = s0 - 1.0 / theta;
            let suspect = theta.norm() <= TOL_SUSPECT * denom;
            finite.push((lambda, vecs.column(i).to_owned(), suspect));
        }
        let mut confirm: Option<Vec<Complex64>> = None;
        if finite.iter().any(|f| f.2) {
            let conf = self.second_shift_lambdas(&mut rng, s0, scale)?;
            finite.retain(|(lam, _, suspect)| {
                !suspect || conf.iter().any(|c| (c - lam).norm() <= 1e-6 * (1.0 + lam.norm()))
            });
            confirm = Some(conf);
        }
        let mut finite: Vec<(Complex64, Array1<Complex64>)> =
            finite.into_iter().map(|(l, v, _)| (l, v)).collect();
        let nu = finite.len();
        let mu = r - nu;

        // Deterministic ordering: descending real part, then ascending |Im|,
        // positive imaginary member of a conjugate pair first.
        finite.sort_by(|x, y| {
            y.0.re
                .partial_cmp(&x.0.re)
                .unwrap()
                .then(x.0.im.abs().partial_cmp(&y.0.im.abs()).unwrap())
                .then(y.0.im.partial_cmp(&x.0.im).unwrap())
        });

        // Snap near-real eigenvalues and enforce exact conjugate pairing.
        let mut eigs: Vec<Complex64> = finite.iter().map(|f| f.0).collect();
        let mut rvecs = Array2::<Complex64>::zeros((r, nu));
        for (i, (_, v)) in finite.iter().enumerate() {
            rvecs.column_mut(i).assign(v);
        }
        for lam in eigs.iter_mut() {
            if lam.im.abs() <= 1e-8 * lam.norm().max(1.0) {
                lam.im = 0.0;
            }
        }
        symmetrize_conjugates(&mut eigs, &mut rvecs);

        // Left eigenvectors: eigenproblem of B^H, mapped back through kinv
        // and paired with the right set by eigenvalue proximity.
        let mut lvecs = Array2::<Complex64>::zeros((if want_left { nu } else { 0 }, r));
        if want_left {
            let bh = Array2::from_shape_fn((r, r), |(i, j)| b[[j, i]].conj());
            let (thetas_l, vecs_l) = bh
                .eig()
                .map_err(|err| Error::Numerical(format!("left eigensolver failed: {err}")))?;
            // Map each left-eigenproblem solution to a pencil eigenvalue.
            let mut lpool: Vec<(Complex64, Array1<Complex64>)> = Vec::new();
            for (j, &th_l) in thetas_l.iter().enumerate() {
                let theta = th_l.conj();
                let alpha = s0 * theta - Complex64::new(1.0, 0.0);
                let denom = alpha.norm() + theta.norm();
                if theta.norm() <= TOL_INF * denom {
                    continue;
                }
                let lambda = s0 - 1.0 / theta;
                if theta.norm() <= TOL_SUSPECT * denom {
                    // Same suspect rule as the right side: keep only if
                    // reproduced by the independent shift.
                    if confirm.is_none() {
                        confirm = Some(self.second_shift_lambdas(&mut rng, s0, scale)?);
                    }
                    let conf = confirm.as_ref().expect("confirmation set computed");
                    if !conf
                        .iter()
                        .any(|c| (c - lambda).norm() <= 1e-6 * (1.0 + lambda.norm()))
                    {
                        continue;
                    }
                }
                // u^T B = theta u^T with u = conj(y); w = u^T (s0 E - A)^{-1}.
                let u = vecs_l.column(j).mapv(|z| z.conj());
                let w = kinv.t().dot(&u);
                lpool.push((lambda, w));
            }
            if lpool.len() != nu {
                return Err(Error::Numerical(format!(
                    "left/right finite eigenvalue counts differ: {} vs {nu}",
                    lpool.len()
                )));
            }
            let mut used = vec![false; nu];
            for i in 0..nu {
                let mut best = usize::MAX;
                let mut best_d = f64::INFINITY;
                for (j, cand) in lpool.iter().enumerate() {
                    if used[j] {
                        continue;
                    }
                    let d = (cand.0 - eigs[i]).norm();
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                used[best] = true;
                lvecs.row_mut(i).assign(&lpool[best].1);
            }
            symmetrize_left(&eigs, &mut lvecs);
        }

        // Normalization: unit right vectors, then w_i E v_i = 1 when possible.
        for i in 0..nu {
            let vnorm = rvecs.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                rvecs.column_mut(i).mapv_inplace(|z| z / vnorm);
            }
            if want_left {
                let wev = self.bilinear(&lvecs.row(i).to_owned(), &rvecs.column(i).to_owned());
                if wev.norm() > 1e-12 {
                    lvecs.row_mut(i).mapv_inplace(|z| z / wev);
                } else {
                    // Defective or orthogonal pair: fall back to a unit left vector.
                    let wnorm = lvecs.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if wnorm > 0.0 {
                        lvecs.row_mut(i).mapv_inplace(|z| z / wnorm);
                    }
                }
            }
        }

        Ok(EigenSolution {
            finite_eigs: eigs,
            right_vecs: rvecs,
            left_vecs: lvecs,
            inf_multiplicity: mu,
            nu,
        })
    }

    /// Finite eigenvalues computed from a second, independent shift; used
    /// to confirm or reject suspect near-infinite eigenvalues.
    fn second_shift_lambdas(
        &self,
        rng: &mut ChaCha8Rng,
        s0: Complex64,
        scale: f64,
    ) -> Result<Vec<Complex64>> {
        use ndarray_linalg::EigVals;
        let e_c = self.e.mapv(|x| Complex64::new(x, 0.0));
        for _ in 0..16 {
            let s1 =
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.25..1.0)) * scale * 2.0;
            if (s1 - s0).norm() <= 1e-3 * scale {
                continue;
            }
            let k = self.complex_at(s1);
            let kinv = match k.inv() {
                Ok(m) => m,
                Err(_) => continue,
            };
            let b = kinv.dot(&e_c);
            let thetas = b
                .eigvals()
                .map_err(|err| Error::Numerical(format!("eigensolver failed: {err}")))?;
            let mut lambdas = Vec::new();
            for &theta in thetas.iter() {
                let alpha = s1 * theta - Complex64::new(1.0, 0.0);
                if theta.norm() <= TOL_INF * (alpha.norm() + theta.norm()) {
                    continue;
                }
                lambdas.push(s1 - 1.0 / theta);
            }
            return Ok(lambdas);
        }
        Err(Error::NonRegular(
            "could not find a second invertible shift s1 E - A".into(),
        ))
    }

    /// `w E v` for a candidate left/right eigenpair.
    pub fn bilinear(&self, w: &Array1<Complex64>, v: &Array1<Complex64>) -> Complex64 {
        let r = self.r();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..r {
            let mut ev = Complex64::new(0.0, 0.0);
            for k in 0..r {
                ev += Complex64::new(self.e[[j, k]], 0.0) * v[k];
            }
            acc += w[j] * ev;
        }
        acc
    }

    /// Residual `||(lambda E - A) v||_2 / ((||E|| + ||A||) ||v||_2)` of a right eigenpair.
    pub fn right_residual(&self, lambda: Complex64, v: &Array1<Complex64>) -> f64 {
        let m = self.complex_at(lambda);
        let res = m.dot(v);
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = (self.e.norm_l2() + self.a.norm_l2()).max(1e-300);
        res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (scale * vnorm.max(1e-300))
    }

    /// Residual of a left eigenpair, `||w (lambda E - A)||` scaled as above.
    pub fn left_residual(&self, lambda: Complex64, w: &Array1<Complex64>) -> f64 {
        let m = self.complex_at(lambda);
        let res = m.t().dot(w);
        let wnorm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = (self.e.norm_l2() + self.a.norm_l2()).max(1e-300);
        res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (scale * wnorm.max(1e-300))
    }

    /// Apply a Möbius spectral transform, producing the pencil
    /// `z (aE - cA) - (dA - bE)`.
    ///
    /// A finite eigenvalue `z` of the result maps back to a prime
    /// eigenvalue `s = (a z + b)/(c z + d)`. Complex coefficient parts are
    /// rejected because the toolkit works with real pencils; all named
    /// special transforms (prime, invert, shift & invert, Cayley) are real.
    pub fn moebius_transform(&self, coeffs: &MoebiusCoeffs) -> Result<MatrixPencil> {
        for (name, z) in [
            ("a", coeffs.a),
            ("b", coeffs.b),
            ("c", coeffs.c),
            ("d", coeffs.d),
        ] {
            if z.im.abs() > 1e-12 * z.norm().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "Möbius coefficient {name} = {z} has a non-real part; \
                     real pencils support only real-coefficient transforms"
                )));
            }
        }
        let (a, b, c, d) = (coeffs.a.re, coeffs.b.re, coeffs.c.re, coeffs.d.re);
        if (a * d - b * c).abs() <= 1e-14 {
            return Err(Error::InvalidInput("degenerate Möbius coefficients".into()));
        }
        let e_new = a * &self.e - c * &self.a;
        let a_new = d * &self.a - b * &self.e;
        MatrixPencil::new(e_new, a_new)
    }
}

/// Force exact conjugate symmetry on a computed spectrum: each eigenvalue
/// with positive imaginary part is paired with its nearest negative-imaginary
/// partner, whose value and vector are overwritten with exact conjugates.
fn symmetrize_conjugates(eigs: &mut [Complex64], vecs: &mut Array2<Complex64>) {
    let n = eigs.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || eigs[i].im <= 0.0 {
            continue;
        }
        let target = eigs[i].conj();
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &lam) in eigs.iter().enumerate() {
            if j == i || used[j] || lam.im >= 0.0 {
                continue;
            }
            let d = (lam - target).norm();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        if best != usize::MAX && best_d <= 1e-6 * target.norm().max(1.0) {
            used[i] = true;
            used[best] = true;
            eigs[best] = target;
            let col = vecs.column(i).mapv(|z| z.conj());
            vecs.column_mut(best).assign(&col);
        }
    }
}

/// Same pairing for left-eigenvector rows, after the spectrum has been fixed.
fn symmetrize_left(eigs: &[Complex64], lvecs: &mut Array2<Complex64>) {
    let n = eigs.len();
    for i in 0..n {
        if eigs[i].im <= 0.0 {
            continue;
        }
        let target = eigs[i].conj();
        for j in 0..n {
            if j != i && (eigs[j] - target).norm() == 0.0 {
                let row = lvecs.row(i).mapv(|z| z.conj());
                lvecs.row_mut(j).assign(&row);
                break;
            }
        }
    }
}

/// Damping ratio and natural frequency of one finite eigenvalue:
/// `zeta = -Re(lambda)/|lambda|`, `f_n = |lambda| / 2 pi` (Hz).
pub fn damping_and_frequency(lambda: Complex64) -> Result<(f64, f64)> {
    let mag = lambda.norm();
    if mag == 0.0 {
        return Err(Error::Precondition(
            "damping ratio is undefined for a zero eigenvalue".into(),
        ));
    }
    Ok((-lambda.re / mag, mag / (2.0 * std::f64::consts::PI)))
}

/// Stability report for a computed spectrum.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// All finite eigenvalues strictly in the open left half plane
    /// (real parts below `-zero_tol`).
    pub stable: bool,
    /// Some eigenvalue sits within `zero_tol` of the imaginary axis.
    pub marginal: bool,
    /// All oscillatory modes exceed the damping floor.
    pub well_damped: bool,
    /// Largest real part over the finite spectrum.
    pub spectral_abscissa: f64,
    /// Smallest damping ratio over oscillatory (nonzero) modes, if any.
    pub min_zeta: Option<f64>,
    pub damping_floor: f64,
    pub zero_tol: f64,
}

/// Classify a spectrum: stable iff every finite eigenvalue has
/// `Re(lambda) < -zero_tol`; "well-damped" additionally requires every
/// oscillatory mode to have `zeta > damping_floor`. Eigenvalues with
/// `|Re| <= zero_tol` are reported as marginal rather than silently
/// classed either way.
pub fn stability_verdict(
    sol: &EigenSolution,
    damping_floor: f64,
    zero_tol: f64,
) -> StabilityReport {
    let mut abscissa = f64::NEG_INFINITY;
    let mut min_zeta: Option<f64> = None;
    let mut marginal = false;
    for &lam in &sol.finite_eigs {
        abscissa = abscissa.max(lam.re);
        if lam.re.abs() <= zero_tol {
            marginal = true;
        }
        if lam.norm() > 0.0 {
            let zeta = -lam.re / lam.norm();
            min_zeta = Some(min_zeta.map_or(zeta, |z: f64| z.min(zeta)));
        }
    }
    let stable = !sol.finite_eigs.is_empty() && abscissa < -zero_tol;
    StabilityReport {
        stable,
        marginal,
        well_damped: stable && min_zeta.is_none_or(|z| z > damping_floor),
        spectral_abscissa: if sol.finite_eigs.is_empty() {
            f64::NEG_INFINITY
        } else {
            abscissa
        },
        min_zeta,
        damping_floor,
        zero_tol,
    }
}

/// Cluster a spectrum into groups of numerically repeated eigenvalues and
/// report (representative, algebraic multiplicity) pairs. Two eigenvalues
/// belong to one cluster when `|lambda_i - lambda_j| <= 1e-6 max(1, |lambda_i|)`.
pub fn cluster_multiplicities(eigs: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for &lam in eigs {
        match groups
            .iter_mut()
            .find(|(rep, _)| (lam - *rep).norm() <= TOL_CLUSTER * rep.norm().max(1.0))
        {
            Some((rep, count)) => {
                // Running mean keeps the representative centred on the cluster.
                *rep = (*rep * (*count as f64) + lam) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => groups.push((lam, 1)),
        }
    }
    groups
}
