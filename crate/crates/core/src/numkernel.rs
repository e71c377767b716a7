//! Dense complex linear algebra used by every construction in the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. The kernels here are thin,
//! deterministic wrappers that fix conventions the rest of the crate relies
//! on: singular values sorted in nonincreasing order, full (square) unitary
//! factors, ascending Hermitian spectra and a single notion of numerical rank.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, QR};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
/// The imaginary unit.
pub const J: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// How a numerical rank decision turns singular values into a count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTolerance {
    /// Threshold is `value * max(rows, cols) * eps * sigma_max`.
    Relative(f64),
    /// Threshold is `value` itself.
    Absolute(f64),
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance::Relative(1.0)
    }
}

impl RankTolerance {
    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        match *self {
            RankTolerance::Relative(v) => v * rows.max(cols) as f64 * f64::EPSILON * sigma_max,
            RankTolerance::Absolute(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            RankTolerance::Relative(v) | RankTolerance::Absolute(v) => v,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::Input(format!("rank tolerance must be finite and nonnegative, got {v}")))
        }
    }
}

/// Full singular value decomposition `A = U diag(S) V*` with square unitary factors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Input("svd of an empty matrix".into()));
    }
    ensure_finite(a)?;
    if m < n {
        let t = svd(&a.adjoint())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (w, v) = hestenes(a)?;
    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, w.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let s: Vec<f64> = order.iter().map(|&(_, x)| x).collect();
    // Columns at or below the Jacobi skip level were never orthogonalized.
    let floor = 2.0 * f64::EPSILON * f64::EPSILON * a.norm();
    let kept: Vec<usize> = order.iter().filter(|&&(_, x)| x > floor).map(|&(j, _)| j).collect();
    let u_kept = CMatrix::from_fn(m, kept.len(), |r, col| w[(r, kept[col])] / s[col]);
    Ok(Svd {
        u: complete_basis(&u_kept),
        s,
        v: CMatrix::from_fn(n, n, |r, col| v[(r, order[col].0)]),
    })
}

/// Singular values only, nonincreasing. Empty matrices have none.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let tall = if a.nrows() >= a.ncols() { a.clone() } else { a.adjoint() };
    let Ok((w, _)) = hestenes(&tall) else {
        return vec![f64::NAN; tall.ncols()];
    };
    let mut s: Vec<f64> = (0..w.ncols()).map(|j| w.column(j).norm()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi on a tall matrix: returns `W = A·V` with mutually
/// orthogonal columns and the unitary `V`. Singular values are the column
/// norms of `W`.
fn hestenes(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (m, n) = a.shape();
    let tol = f64::EPSILON * (m as f64).sqrt();
    let big = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut v = CMatrix::identity(n, n);
    if big == 0.0 {
        return Ok((a.clone(), v));
    }
    // Unit scale keeps column norms well inside the exponent range.
    let mut w = a / Complex64::new(big, 0.0);
    let negligible = f64::EPSILON * f64::EPSILON * w.norm();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (np, nq) = (w.column(p).norm(), w.column(q).norm());
                if np.min(nq) <= negligible {
                    continue;
                }
                let (alpha, beta) = (np * np, nq * nq);
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g <= tol * np * nq {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = 1.0 / t.hypot(1.0);
                let sn = cs * t;
                rotate_columns(&mut w, p, q, cs, sn, phase);
                rotate_columns(&mut v, p, q, cs, sn, phase);
            }
        }
        if !rotated {
            return Ok((w * Complex64::new(big, 0.0), v));
        }
    }
    Err(Error::Internal("Jacobi SVD did not converge".into()))
}

/// `[x_p, x_q] ← [x_p, e·x_q]·[[c, s], [−s, c]]`
fn rotate_columns(x: &mut CMatrix, p: usize, q: usize, cs: f64, sn: f64, phase: Complex64) {
    for i in 0..x.nrows() {
        let xp = x[(i, p)];
        let xq = x[(i, q)] * phase;
        x[(i, p)] = xp * cs - xq * sn;
        x[(i, q)] = xp * sn + xq * cs;
    }
}

/// Extends a matrix with orthonormal columns to a square unitary matrix,
/// keeping the given columns in place.
pub fn complete_basis(q: &CMatrix) -> CMatrix {
    let (m, k) = q.shape();
    if k >= m {
        return q.clone();
    }
    let mut aug = CMatrix::zeros(m, k + m);
    aug.columns_mut(0, k).copy_from(q);
    aug.columns_mut(k, m).fill_with_identity();
    let full_q = QR::new(aug).q();
    let mut out = CMatrix::zeros(m, m);
    out.columns_mut(0, k).copy_from(q);
    out.columns_mut(k, m - k).copy_from(&full_q.columns(k, m - k));
    out
}

pub fn rank_of(a: &CMatrix, tol: RankTolerance) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    let thr = tol.threshold(smax, a.nrows(), a.ncols());
    s.iter().filter(|&&x| x > thr).count()
}

/// Spectral norm.
pub fn norm2(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest singular value over `min(rows, cols)` values; zero for empty input.
pub fn sigma_min(a: &CMatrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with matching columns of `Q`.
pub fn hermitian_eigendecomp(a: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    if !a.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    ensure_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), Vec::new()));
    }
    let defect = (a - a.adjoint()).norm();
    let scale = a.norm();
    if defect > 1e-12 * scale {
        return Err(Error::Structure {
            what: "matrix is not Hermitian".into(),
            defect,
        });
    }
    let herm = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lambdas = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let q = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok((q, lambdas))
}

/// Solves `A X = B` for square `A`.
pub fn lin_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!("lin_solve needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    ensure_finite(a)?;
    ensure_finite(b)?;
    let s = singular_values(a);
    let (smax, smin) = (s[0], s[s.len() - 1]);
    if smin <= a.nrows() as f64 * f64::EPSILON * smax || smax == 0.0 {
        return Err(Error::Singular { sigma_min: smin });
    }
    a.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or(Error::Singular { sigma_min: smin })
}

/// Determinant via LU; zero-sized matrices have determinant one.
pub fn det(a: &CMatrix) -> Complex64 {
    if a.nrows() == 0 {
        return ONE;
    }
    a.clone().lu().determinant()
}

/// Roots of `c[0] + c[1] z + ... + c[n] z^n`.
///
/// Trailing coefficients below `1e-12` of the largest are dropped first. Roots
/// come from the eigenvalues of the companion matrix and are then polished by
/// a few Newton steps on the original polynomial.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate("zero (or non-finite) polynomial has no well-defined roots".into()));
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-12 * scale {
        deg -= 1;
    }
    let p = &coeffs[..=deg];
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = p[deg];
    let mut comp = CMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -p[i] / lead;
    }
    let (_, t) = Schur::new(comp).unpack();
    let mut roots: Vec<Complex64> = (0..deg).map(|i| t[(i, i)]).collect();
    for r in roots.iter_mut() {
        *r = newton_polish(p, *r);
    }
    Ok(roots)
}

fn horner_with_derivative(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut val = ZERO;
    let mut der = ZERO;
    for &coef in p.iter().rev() {
        der = der * z + val;
        val = val * z + coef;
    }
    (val, der)
}

fn newton_polish(p: &[Complex64], mut z: Complex64) -> Complex64 {
    let (mut val, _) = horner_with_derivative(p, z);
    for _ in 0..8 {
        let (_, der) = horner_with_derivative(p, z);
        if der.norm() == 0.0 {
            break;
        }
        let candidate = z - val / der;
        let (cval, _) = horner_with_derivative(p, candidate);
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(cval.norm() < val.norm()) {
            break;
        }
        z = candidate;
        val = cval;
    }
    z
}

pub fn hstack(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.columns_mut(offset, b.ncols()).copy_from(*b);
        offset += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.rows_mut(offset, b.nrows()).copy_from(*b);
        offset += b.nrows();
    }
    out
}

/// `[[a, b], [c, d]]`, with shapes checked by the caller's construction.
pub fn block2x2(a: &CMatrix, b: &CMatrix, cm: &CMatrix, d: &CMatrix) -> CMatrix {
    vstack(&[&hstack(&[a, b]), &hstack(&[cm, d])])
}

pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// Seeded random fixtures. Entries are uniform in the unit square of the
/// complex plane centred at the origin.
pub mod random {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub type TestRng = ChaCha8Rng;

    pub fn rng(seed: u64) -> TestRng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn scalar<R: Rng>(rng: &mut R) -> Complex64 {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| scalar(rng))
    }

    pub fn real_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), 0.0))
    }

    /// Product of `rows x rank` and `rank x cols` random factors.
    pub fn low_rank<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> CMatrix {
        matrix(rng, rows, rank) * matrix(rng, rank, cols)
    }

    /// Random unitary matrix from the QR factor of a random square matrix.
    pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        QR::new(matrix(rng, n, n)).q()
    }

    /// Point in the complex annulus `lo <= |z| <= hi`.
    pub fn point<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
        let r = rng.random_range(lo..=hi);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(r, theta)
    }
}
