//! Strong minimality certificates, finite and infinite structure, eigenvector
//! recovery and degree bookkeeping for linear system matrices.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearize::LinearSystemMatrix;
use crate::numkernel::{
    self, c, det, hstack, lin_solve, norm2, poly_roots, random, rank_of, singular_values, vstack, CMatrix, CVector,
    RankTolerance, ZERO,
};
use crate::polyrat::{PolyMatrix, StructuralIndices};

/// `D(z) + C(z) A(z)⁻¹ B(z)`; fails at poles of the realization.
pub fn transfer_eval(lin: &LinearSystemMatrix, z: Complex64) -> Result<CMatrix> {
    lin.transfer(z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityOptions {
    /// Rank decision for the constant matrices `[A₁, −B₁]` and `[A₁; C₁]`.
    pub rank_tol: RankTolerance,
    /// A point is a finite eigenvalue when `σ_p` falls below this multiple
    /// of the local pencil scale `‖F₁‖|λ| + ‖F₀‖`.
    pub finite_tol: f64,
    /// Random probe points in addition to the candidate eigenvalues.
    pub probes: usize,
    pub seed: u64,
}

impl Default for MinimalityOptions {
    fn default() -> Self {
        MinimalityOptions {
            rank_tol: RankTolerance::default(),
            finite_tol: 1e-8,
            probes: 20,
            seed: 0,
        }
    }
}

/// Outcome of one of the four rank conditions. `margin` is the smallest
/// observed value divided by `threshold`; the condition holds iff it exceeds 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub ok: bool,
    pub smallest: f64,
    pub threshold: f64,
}

impl RankCheck {
    fn vacuous() -> Self {
        RankCheck {
            ok: true,
            smallest: f64::INFINITY,
            threshold: 0.0,
        }
    }

    pub fn margin(&self) -> f64 {
        if self.threshold == 0.0 {
            f64::INFINITY
        } else {
            self.smallest / self.threshold
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Controllability,
    Observability,
}

/// A point where `[A(λ), −B(λ)]` or `[A(λ); C(λ)]` lost rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub lambda: Complex64,
    pub condition: Condition,
    /// Number of singular values at or below the local threshold.
    pub deficiency: usize,
    pub relative_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityCertificate {
    pub controllable_inf: RankCheck,
    pub observable_inf: RankCheck,
    pub controllable_fin: RankCheck,
    pub observable_fin: RankCheck,
    pub witnesses: Vec<Witness>,
}

impl MinimalityCertificate {
    pub fn strongly_minimal(&self) -> bool {
        self.flags().iter().all(|&f| f)
    }

    /// `[controllable_inf, observable_inf, controllable_fin, observable_fin]`
    pub fn flags(&self) -> [bool; 4] {
        [
            self.controllable_inf.ok,
            self.observable_inf.ok,
            self.controllable_fin.ok,
            self.observable_fin.ok,
        ]
    }

    pub fn min_margin(&self) -> f64 {
        [
            self.controllable_inf,
            self.observable_inf,
            self.controllable_fin,
            self.observable_fin,
        ]
        .iter()
        .map(RankCheck::margin)
        .fold(f64::INFINITY, f64::min)
    }
}

/// Full row rank test of a constant `p × q` matrix (`p ≤ q` expected).
fn row_rank_check(m: &CMatrix, tol: RankTolerance) -> RankCheck {
    let p = m.nrows();
    if p == 0 {
        return RankCheck::vacuous();
    }
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let threshold = tol.threshold(smax, m.nrows(), m.ncols()).max(f64::MIN_POSITIVE);
    let smallest = if s.len() < p { 0.0 } else { s[p - 1] };
    RankCheck {
        ok: smallest > threshold,
        smallest,
        threshold,
    }
}

/// Coefficients of `det(G + λF)` in ascending powers together with the
/// radius used for interpolation, or `None` when the pencil is empty.
fn det_coefficients(f: &CMatrix, g: &CMatrix) -> (Vec<Complex64>, f64) {
    let n = f.nrows();
    let (nf, ng) = (norm2(f), norm2(g));
    let rho = if nf > 0.0 { 1.0 + ng / nf } else { 1.0 };
    let nodes = n + 1;
    let values: Vec<Complex64> = (0..nodes)
        .map(|k| {
            let w = Complex64::from_polar(1.0, TAU * k as f64 / nodes as f64);
            det(&(g + f * (w * rho)))
        })
        .collect();
    // coefficients of det(G + ρμF) in μ
    let scaled: Vec<Complex64> = (0..nodes)
        .map(|j| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -TAU * (j * k) as f64 / nodes as f64))
                .sum();
            sum / nodes as f64
        })
        .collect();
    (scaled, rho)
}

/// Relative trim used on interpolated determinant coefficients.
const DET_TRIM: f64 = 1e-10;

/// Roots of `det(G + λF)`, polished by Newton steps on the log-determinant.
/// `None` when the determinant vanishes identically to working precision.
fn det_roots(f: &CMatrix, g: &CMatrix) -> Result<Option<Vec<Complex64>>> {
    let n = f.nrows();
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    let (mut scaled, rho) = det_coefficients(f, g);
    let big = scaled.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return Ok(None);
    }
    for z in scaled.iter_mut() {
        if z.norm() <= DET_TRIM * big {
            *z = ZERO;
        }
    }
    while scaled.len() > 1 && scaled.last() == Some(&ZERO) {
        scaled.pop();
    }
    if scaled.len() == 1 {
        return Ok(Some(Vec::new()));
    }
    let roots: Vec<Complex64> = poly_roots(&scaled)?.into_iter().map(|mu| mu * rho).collect();
    Ok(Some(roots.into_iter().map(|r| newton_polish(f, g, r)).collect()))
}

fn newton_polish(f: &CMatrix, g: &CMatrix, mut z: Complex64) -> Complex64 {
    let mut best = det(&(g + f * z)).norm();
    for _ in 0..8 {
        let Ok(x) = lin_solve(&(g + f * z), f) else {
            return z;
        };
        let tr = x.trace();
        if tr.norm() == 0.0 {
            return z;
        }
        let next = z - tr.inv();
        let val = det(&(g + f * next)).norm();
        // also stops on NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(val < best) {
            return z;
        }
        best = val;
        z = next;
    }
    z
}

/// Groups points within `radius·max(1, |z|)` of each other (single linkage)
/// and returns `(centroid, count)` pairs.
pub fn cluster(points: &[Complex64], radius: f64) -> Vec<(Complex64, usize)> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = points[i].norm().max(points[j].norm()).max(1.0);
            if (points[i] - points[j]).norm() <= radius * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for (i, &z) in points.iter().enumerate().take(n) {
        let root = find(&mut label, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => {
                g.1 += z;
                g.2 += 1;
            }
            None => groups.push((root, z, 1)),
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups.into_iter().map(|(_, s, k)| (s / k as f64, k)).collect();
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    out
}

/// A point, its rank deficiency and the relative smallest singular value.
type PointDeficiency = (Complex64, usize, f64);

/// Checks that `λF₁ + F₀` (`p × q`, `p ≤ q`) has full row rank `p` for every
/// finite `λ`. Returns the check and the offending points.
fn finite_row_check(
    f1: &CMatrix,
    f0: &CMatrix,
    opts: &MinimalityOptions,
    rng: &mut random::TestRng,
) -> Result<(RankCheck, Vec<PointDeficiency>)> {
    let (p, q) = f1.shape();
    if p == 0 {
        return Ok((RankCheck::vacuous(), Vec::new()));
    }
    if q < p {
        let check = RankCheck {
            ok: false,
            smallest: 0.0,
            threshold: opts.finite_tol,
        };
        return Ok((check, Vec::new()));
    }
    let (n1, n0) = (norm2(f1), norm2(f0));
    let mut candidates = Vec::new();
    for _ in 0..2 {
        let z = random::matrix(rng, q, p);
        if let Some(roots) = det_roots(&(f1 * &z), &(f0 * &z))? {
            // centroids recover multiple roots that the polynomial solver splits
            candidates.extend(cluster(&roots, 1e-4).into_iter().map(|(r, _)| r));
            candidates.extend(roots);
        }
    }
    let rho = if n1 > 0.0 { 1.0 + n0 / n1 } else { 1.0 };
    for _ in 0..opts.probes {
        candidates.push(random::point(rng, 0.05 * rho, 2.0 * rho));
    }
    let mut smallest = f64::INFINITY;
    let mut witnesses = Vec::new();
    for lam in candidates {
        let scale = n1 * lam.norm() + n0;
        if scale == 0.0 {
            continue;
        }
        let s = singular_values(&(f0 + f1 * lam));
        let rel = if s.len() < p { 0.0 } else { s[p - 1] / scale };
        smallest = smallest.min(rel);
        if rel <= opts.finite_tol {
            let deficiency = s.iter().take(p).filter(|&&x| x / scale <= opts.finite_tol).count().max(1);
            witnesses.push((lam, deficiency, rel));
        }
    }
    if smallest == f64::INFINITY {
        // zero pencil with p > 0
        smallest = 0.0;
    }
    let check = RankCheck {
        ok: smallest > opts.finite_tol,
        smallest,
        threshold: opts.finite_tol,
    };
    Ok((check, witnesses))
}

/// Rank conditions at infinity on `[A₁, −B₁]` and `[A₁; C₁]`, and at every
/// finite point on `[A(λ), −B(λ)]` and `[A(λ); C(λ)]`. The finite part
/// compresses each rectangular pencil to square ones with two random right
/// factors, tests the rectangular pencil at every root of their determinants
/// and at random probe points.
pub fn check_strong_minimality(lin: &LinearSystemMatrix, opts: &MinimalityOptions) -> Result<MinimalityCertificate> {
    opts.rank_tol.validate()?;
    if !(opts.finite_tol > 0.0 && opts.finite_tol < 1.0) {
        return Err(Error::Input(format!("finite tolerance must lie in (0, 1), got {}", opts.finite_tol)));
    }
    if lin.state_rows() != lin.state_cols() {
        return Err(Error::Shape("strong minimality needs a square state block".into()));
    }
    let mut rng = random::rng(opts.seed);

    let ctrl1 = hstack(&[&lin.a1, &(-&lin.b1)]);
    let ctrl0 = hstack(&[&(-&lin.a0), &lin.b0]);
    let obs1 = vstack(&[&lin.a1, &lin.c1]);
    let obs0 = vstack(&[&(-&lin.a0), &(-&lin.c0)]);

    let controllable_inf = row_rank_check(&ctrl1, opts.rank_tol);
    let observable_inf = row_rank_check(&obs1.adjoint(), opts.rank_tol);

    let (controllable_fin, cw) = finite_row_check(&ctrl1, &ctrl0, opts, &mut rng)?;
    // column rank of λF₁ + F₀ at λ is row rank of λ̄F₁* + F₀* at λ̄
    let (observable_fin, ow) = finite_row_check(&obs1.adjoint(), &obs0.adjoint(), opts, &mut rng)?;

    let mut witnesses: Vec<Witness> = cw
        .into_iter()
        .map(|(lambda, deficiency, relative_sigma)| Witness {
            lambda,
            condition: Condition::Controllability,
            deficiency,
            relative_sigma,
        })
        .collect();
    witnesses.extend(ow.into_iter().map(|(lam, deficiency, relative_sigma)| Witness {
        lambda: lam.conj(),
        condition: Condition::Observability,
        deficiency,
        relative_sigma,
    }));
    Ok(MinimalityCertificate {
        controllable_inf,
        observable_inf,
        controllable_fin,
        observable_fin,
        witnesses,
    })
}

fn probe_points(seed: u64, count: usize) -> Vec<Complex64> {
    let mut rng = random::rng(seed);
    (0..count).map(|_| random::point(&mut rng, 0.3, 1.7)).collect()
}

/// True when `M(z)` is rank deficient at three random points.
fn identically_singular(eval: impl Fn(Complex64) -> CMatrix, n: usize) -> bool {
    probe_points(0x5eed, 3)
        .into_iter()
        .all(|z| rank_of(&eval(z), RankTolerance::Relative(10.0)) < n)
}

/// Finite eigenvalues of the square pencil `L₀ + λL₁` with multiplicities.
pub fn pencil_finite_eigenvalues(l0: &CMatrix, l1: &CMatrix) -> Result<Vec<(Complex64, usize)>> {
    if l0.shape() != l1.shape() || !l0.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square pencil, got {:?} and {:?}",
            l0.shape(),
            l1.shape()
        )));
    }
    let n = l0.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    numkernel::ensure_finite(l0)?;
    numkernel::ensure_finite(l1)?;
    if identically_singular(|z| l0 + l1 * z, n) {
        return Err(Error::SingularPencil);
    }
    let roots = det_roots(l1, l0)?.ok_or(Error::SingularPencil)?;
    Ok(cluster(&roots, 1e-6))
}

/// Normal rank of a matrix function by its largest rank at random points.
pub fn normal_rank(eval: impl Fn(Complex64) -> CMatrix, tol: RankTolerance, seed: u64) -> usize {
    probe_points(seed, 3).into_iter().map(|z| rank_of(&eval(z), tol)).max().unwrap_or(0)
}

/// Partial multiplicities at `λ = 0`, one entry per unit of normal rank
/// (zeros included), nondecreasing.
///
/// With `T_k` the block lower-triangular Toeplitz matrix of the first `k`
/// Taylor coefficients and `ρ_k = rank T_k`, the number of multiplicities
/// that are at least `k` is `r − (ρ_k − ρ_{k−1})`.
pub fn partial_mults_at_zero(m: &PolyMatrix, tol: RankTolerance) -> Result<StructuralIndices> {
    let (rows, cols) = (m.rows(), m.cols());
    let r = normal_rank(|z| m.eval(z), tol, 0xabc);
    if r == 0 {
        return Ok(StructuralIndices {
            normal_rank: 0,
            indices: Vec::new(),
        });
    }
    let bound = rows.max(cols) * m.degree().max(1) + 1;
    let mut at_least = Vec::new();
    let mut prev = 0usize;
    for k in 1..=bound + 1 {
        let mut t = CMatrix::zeros(k * rows, k * cols);
        for i in 0..k {
            for j in 0..=i {
                t.view_mut((i * rows, j * cols), (rows, cols)).copy_from(&m.coeff(i - j));
            }
        }
        let rho = rank_of(&t, tol);
        let s = rho.checked_sub(prev).ok_or_else(|| Error::Internal("Toeplitz ranks decreased".into()))?;
        prev = rho;
        if s > r {
            return Err(Error::Internal(format!(
                "Toeplitz rank increment {s} exceeds the normal rank {r}; tolerance too tight"
            )));
        }
        if s == r {
            let mut indices = Vec::with_capacity(r);
            let mut counts = at_least.clone();
            counts.push(0);
            indices.extend(std::iter::repeat_n(0i64, r - counts[0].min(r)));
            for (j, pair) in counts.windows(2).enumerate() {
                indices.extend(std::iter::repeat_n(j as i64 + 1, pair[0] - pair[1]));
            }
            return Ok(StructuralIndices { normal_rank: r, indices });
        }
        at_least.push(r - s);
    }
    Err(Error::Internal(format!(
        "partial multiplicities did not settle within {bound} Toeplitz steps"
    )))
}

/// `rev₁A(λ) = A₁ − λA₀`.
pub fn reversed_state_block(lin: &LinearSystemMatrix) -> PolyMatrix {
    PolyMatrix::with_shape(lin.state_rows(), lin.state_cols(), vec![lin.a1.clone(), -&lin.a0])
        .expect("pencil blocks share a shape")
}

/// `rev₁L(λ) = L₁ + λL₀`.
pub fn reversed_pencil(lin: &LinearSystemMatrix) -> PolyMatrix {
    let (l0, l1) = lin.pencil_coeffs();
    let (rows, cols) = l0.shape();
    PolyMatrix::with_shape(rows, cols, vec![l1, l0]).expect("pencil blocks share a shape")
}

fn nonzero(ix: &StructuralIndices) -> Vec<i64> {
    ix.indices.iter().copied().filter(|&x| x != 0).collect()
}

/// Structural indices at infinity `d₁ ≤ … ≤ d_r` of the transfer function
/// of a strongly minimal `L`:
/// `(−e_s, …, −e₁, 0, …, 0, ẽ₁, …, ẽ_u) − (1, …, 1)` where `eᵢ` and `ẽᵢ`
/// are the nonzero partial multiplicities at 0 of `rev₁A` and `rev₁L`.
pub fn indices_at_infinity(lin: &LinearSystemMatrix, r: usize, tol: RankTolerance) -> Result<StructuralIndices> {
    let cert = check_strong_minimality(lin, &MinimalityOptions::default())?;
    if !cert.strongly_minimal() {
        return Err(Error::Precondition(format!(
            "pencil is not strongly minimal (flags {:?})",
            cert.flags()
        )));
    }
    indices_at_infinity_unchecked(lin, r, tol)
}

/// [`indices_at_infinity`] without re-running the certificate.
pub fn indices_at_infinity_unchecked(lin: &LinearSystemMatrix, r: usize, tol: RankTolerance) -> Result<StructuralIndices> {
    let e = if lin.state_dim() == 0 {
        Vec::new()
    } else {
        nonzero(&partial_mults_at_zero(&reversed_state_block(lin), tol)?)
    };
    let et = nonzero(&partial_mults_at_zero(&reversed_pencil(lin), tol)?);
    let (s, u) = (e.len(), et.len());
    let interior = r.checked_sub(s + u).ok_or_else(|| {
        Error::Internal(format!("{s} + {u} nonzero multiplicities exceed the normal rank {r}"))
    })?;
    let mut d: Vec<i64> = e.iter().map(|x| -x).collect();
    d.extend(std::iter::repeat_n(0, interior));
    d.extend(et);
    d.sort_unstable();
    Ok(StructuralIndices {
        normal_rank: r,
        indices: d.into_iter().map(|x| x - 1).collect(),
    })
}

/// Converts indices at infinity of a degree-`deg` polynomial into the partial
/// multiplicities of `rev_deg P` at zero: `tᵢ = dᵢ + deg`, zeros dropped.
pub fn infinity_to_reversal(ix: &StructuralIndices, deg: usize) -> Result<StructuralIndices> {
    let mut t = Vec::new();
    for &d in &ix.indices {
        let v = d + deg as i64;
        if v < 0 {
            return Err(Error::Internal(format!("index {d} is below −{deg}")));
        }
        if v > 0 {
            t.push(v);
        }
    }
    Ok(StructuralIndices {
        normal_rank: ix.normal_rank,
        indices: t,
    })
}

/// Partial multiplicities of the infinite eigenvalue of `P`, i.e. of
/// `rev_d P` at zero, read off a strongly minimal linearization.
pub fn eig_structure_at_infinity_poly(p: &PolyMatrix, lin: &LinearSystemMatrix, tol: RankTolerance) -> Result<StructuralIndices> {
    let r = normal_rank(|z| p.eval(z), tol, 0x51);
    infinity_to_reversal(&indices_at_infinity(lin, r, tol)?, p.degree())
}

/// Quadratic shortcut: `(1, …, 1, ẽ₁+1, …, ẽ_u+1)` with `r_P − r₂ − u` ones,
/// where `ẽᵢ` are the nonzero multiplicities of `rev₁L̂` at zero.
pub fn quad_infinity(p: &PolyMatrix, lin: &LinearSystemMatrix, r_p: usize, r2: usize, tol: RankTolerance) -> Result<StructuralIndices> {
    if p.degree() != 2 {
        return Err(Error::Input(format!("quadratic shortcut needs degree 2, got {}", p.degree())));
    }
    quad_infinity_parts(lin, r_p, r2, tol)
}

/// The quadratic shortcut given only the pencil: `r₂` is the rank of the
/// leading coefficient, which equals the state dimension of a deflated linearization.
pub fn quad_infinity_parts(lin: &LinearSystemMatrix, r_p: usize, r2: usize, tol: RankTolerance) -> Result<StructuralIndices> {
    let et = nonzero(&partial_mults_at_zero(&reversed_pencil(lin), tol)?);
    let ones = r_p
        .checked_sub(r2 + et.len())
        .ok_or_else(|| Error::Internal(format!("r_P − r₂ − u is negative ({r_p} − {r2} − {})", et.len())))?;
    let mut t = vec![1i64; ones];
    t.extend(et.iter().map(|x| x + 1));
    Ok(StructuralIndices {
        normal_rank: r_p,
        indices: t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

const NULL_RESIDUAL: f64 = 1e-8;

/// Projects a null vector of `L(λ₀)` onto the input (right) or output (left)
/// coordinates, giving a null vector of the transfer function at `λ₀`.
pub fn recover_eigenvector(lin: &LinearSystemMatrix, lambda0: Complex64, side: Side, v: &CVector) -> Result<CVector> {
    let l = lin.eval(lambda0);
    let (expected, residual) = match side {
        Side::Right => (l.ncols(), (&l * v).norm()),
        Side::Left => (l.nrows(), (l.adjoint() * v).norm()),
    };
    if v.len() != expected {
        return Err(Error::Shape(format!("vector has length {}, expected {expected}", v.len())));
    }
    let scale = norm2(&l).max(f64::MIN_POSITIVE) * v.norm();
    if residual > NULL_RESIDUAL * scale {
        return Err(Error::Input(format!(
            "vector is not a null vector of L(λ₀): relative residual {:.3e}",
            residual / scale
        )));
    }
    if lin.state_rows() > 0 && numkernel::sigma_min(&lin.a_at(lambda0)) <= 1e-12 * norm2(&lin.a_at(lambda0)) {
        return Err(Error::Precondition("A(λ₀) is singular".into()));
    }
    let p = match side {
        Side::Right => lin.state_cols(),
        Side::Left => lin.state_rows(),
    };
    Ok(v.rows(p, expected - p).into_owned())
}

/// Inverse of [`recover_eigenvector`]: right `x ↦ [A⁻¹Bx; x]`, left
/// `y ↦ [−A^{-*}C*y; y]`.
pub fn lift_eigenvector(lin: &LinearSystemMatrix, lambda0: Complex64, side: Side, x: &CVector) -> Result<CVector> {
    let a = lin.a_at(lambda0);
    let xm = CMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let head = match side {
        Side::Right => {
            if x.len() != lin.inputs() {
                return Err(Error::Shape(format!("expected {} inputs, got {}", lin.inputs(), x.len())));
            }
            if lin.state_rows() == 0 {
                CMatrix::zeros(0, 1)
            } else {
                lin_solve(&a, &(lin.b_at(lambda0) * &xm))?
            }
        }
        Side::Left => {
            if x.len() != lin.outputs() {
                return Err(Error::Shape(format!("expected {} outputs, got {}", lin.outputs(), x.len())));
            }
            if lin.state_rows() == 0 {
                CMatrix::zeros(0, 1)
            } else {
                -lin_solve(&a.adjoint(), &(lin.c_at(lambda0).adjoint() * &xm))?
            }
        }
    };
    let full = vstack(&[&head, &xm]);
    Ok(CVector::from_column_slice(full.as_slice()))
}

/// McMillan degree bookkeeping: the rank of `L₁` of a strongly minimal
/// linearization equals the polar degree of its transfer function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeAudit {
    pub rank_l1: usize,
    pub state_dim: usize,
    /// For polynomial sources: structural indices at infinity and the polar
    /// degree `Σ max(0, −dᵢ)` they imply.
    pub indices_at_infinity: Option<StructuralIndices>,
    pub polar_degree: Option<usize>,
    pub consistent: Option<bool>,
}

pub fn degree_audit(lin: &LinearSystemMatrix, poly: Option<&PolyMatrix>, tol: RankTolerance) -> Result<DegreeAudit> {
    let (_, l1) = lin.pencil_coeffs();
    let rank_l1 = if l1.is_empty() { 0 } else { rank_of(&l1, tol) };
    let mut audit = DegreeAudit {
        rank_l1,
        state_dim: lin.state_dim(),
        indices_at_infinity: None,
        polar_degree: None,
        consistent: None,
    };
    if let Some(p) = poly {
        let r = normal_rank(|z| p.eval(z), tol, 0x51);
        let ix = indices_at_infinity(lin, r, tol)?;
        let polar: usize = ix.indices.iter().map(|&d| (-d).max(0) as usize).sum();
        audit.consistent = Some(polar == rank_l1);
        audit.polar_degree = Some(polar);
        audit.indices_at_infinity = Some(ix);
    }
    Ok(audit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub normal_rank: usize,
    pub indices_at_infinity: StructuralIndices,
    /// Present when the pencil is square and regular.
    pub finite_eigenvalues: Option<Vec<(Complex64, usize)>>,
    pub mcmillan_rank_l1: usize,
}

/// Normal rank of the transfer function of `L` (rank of `L` minus `p`).
pub fn transfer_normal_rank(lin: &LinearSystemMatrix, tol: RankTolerance) -> usize {
    let p = lin.state_dim();
    normal_rank(|z| lin.eval(z), tol, 0x77).saturating_sub(p)
}

pub fn structural_report(lin: &LinearSystemMatrix, tol: RankTolerance) -> Result<StructuralReport> {
    let r = transfer_normal_rank(lin, tol);
    let indices = indices_at_infinity(lin, r, tol)?;
    let (l0, l1) = lin.pencil_coeffs();
    let finite = if l0.is_square() {
        match pencil_finite_eigenvalues(&l0, &l1) {
            Ok(v) => Some(v),
            Err(Error::SingularPencil) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(StructuralReport {
        normal_rank: r,
        indices_at_infinity: indices,
        finite_eigenvalues: finite,
        mcmillan_rank_l1: if l1.is_empty() { 0 } else { rank_of(&l1, tol) },
    })
}

/// Largest finite pole modulus of the realization (eigenvalues of `A(λ)`).
pub fn max_pole_modulus(lin: &LinearSystemMatrix) -> Result<f64> {
    if lin.state_dim() == 0 {
        return Ok(0.0);
    }
    let poles = pencil_finite_eigenvalues(&(-&lin.a0), &lin.a1)?;
    Ok(poles.iter().map(|(z, _)| z.norm()).fold(0.0, f64::max))
}

/// Coefficients of `λ^j` for `j = lowest..=highest` in the expansion of the
/// transfer function about infinity, by discrete Fourier sums on a circle
/// enclosing every pole.
pub fn expansion_at_infinity(lin: &LinearSystemMatrix, lowest: i64, highest: i64, nodes: usize) -> Result<Vec<CMatrix>> {
    if highest < lowest {
        return Ok(Vec::new());
    }
    let radius = 2.0 * max_pole_modulus(lin)?.max(1.0);
    let samples: Vec<(Complex64, CMatrix)> = (0..nodes)
        .map(|k| {
            let z = Complex64::from_polar(radius, TAU * k as f64 / nodes as f64);
            lin.transfer(z).map(|v| (z, v))
        })
        .collect::<Result<_>>()?;
    let (m, n) = (lin.outputs(), lin.inputs());
    Ok((lowest..=highest)
        .map(|j| {
            let mut acc = CMatrix::zeros(m, n);
            for (z, v) in &samples {
                acc += v * z.powi(-j as i32);
            }
            acc / c(nodes as f64, 0.0)
        })
        .collect())
}

/// `‖a − b‖₂ / max(1, ‖b‖₂)`
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    norm2(&(a - b)) / norm2(b).max(1.0)
}
