//! Polynomial, Laurent-tail, state-space and rational matrix data model.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, ensure_finite, lin_solve, norm2, random, CMatrix, J, ZERO};

/// A coefficient counts as zero when its norm is at most this fraction of
/// the largest coefficient norm.
pub const TRIM_RELATIVE: f64 = 1e-13;

/// Structure checks accept a defect up to this multiple of the coefficient scale.
pub const STRUCTURE_RELATIVE: f64 = 1e-12;

/// `P(λ) = P₀ + P₁λ + ... + P_dλ^d` with trailing zero coefficients trimmed.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    coeffs: Vec<CMatrix>,
}

impl PolyMatrix {
    /// Builds from coefficients in ascending powers. At least one coefficient
    /// is required to fix the shape.
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Input("polynomial matrix needs at least one coefficient".into()))?;
        let (rows, cols) = first.shape();
        Self::with_shape(rows, cols, coeffs)
    }

    pub fn with_shape(rows: usize, cols: usize, mut coeffs: Vec<CMatrix>) -> Result<Self> {
        for (i, p) in coeffs.iter().enumerate() {
            if p.shape() != (rows, cols) {
                return Err(Error::Shape(format!(
                    "coefficient {i} is {}x{}, expected {rows}x{cols}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            ensure_finite(p)?;
        }
        let norms: Vec<f64> = coeffs.iter().map(|p| p.norm()).collect();
        let scale = norms.iter().copied().fold(0.0, f64::max);
        let mut len = coeffs.len();
        while len > 1 && norms[len - 1] <= TRIM_RELATIVE * scale {
            len -= 1;
        }
        coeffs.truncate(len.max(1));
        if coeffs.is_empty() {
            coeffs.push(CMatrix::zeros(rows, cols));
        }
        Ok(PolyMatrix { rows, cols, coeffs })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            coeffs: vec![CMatrix::zeros(rows, cols)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// Coefficient of `λ^i`; zero beyond the degree.
    pub fn coeff(&self, i: usize) -> CMatrix {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    pub fn leading(&self) -> &CMatrix {
        self.coeffs.last().expect("at least one coefficient")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|p| p.iter().all(|z| *z == ZERO))
    }

    /// Largest coefficient norm (Frobenius).
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.rows, self.cols);
        for p in self.coeffs.iter().rev() {
            acc = acc * z + p;
        }
        acc
    }

    /// `rev_k P(λ) = λ^k P(1/λ)` for `k ≥ degree`.
    pub fn reversal(&self, k: usize) -> Result<PolyMatrix> {
        if k < self.degree() {
            return Err(Error::Input(format!(
                "reversal order {k} is below the degree {}",
                self.degree()
            )));
        }
        let coeffs = (0..=k).map(|i| self.coeff(k - i)).collect();
        Ok(PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        })
    }
}

pub fn eval_poly(p: &PolyMatrix, z: Complex64) -> CMatrix {
    p.eval(z)
}

/// Truncated expansion `R₋₁λ⁻¹ + ... + R₋₂ₖλ⁻²ᵏ` of a strictly proper part.
/// `coeffs[0]` holds `R₋₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentTail {
    rows: usize,
    cols: usize,
    coeffs: Vec<CMatrix>,
}

impl LaurentTail {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Input("Laurent tail needs at least two blocks".into()))?;
        let (rows, cols) = first.shape();
        if !coeffs.len().is_multiple_of(2) {
            return Err(Error::Input(format!(
                "Laurent tail needs an even number of blocks, got {}",
                coeffs.len()
            )));
        }
        for (i, r) in coeffs.iter().enumerate() {
            if r.shape() != (rows, cols) {
                return Err(Error::Shape(format!(
                    "tail block R_-{} is {}x{}, expected {rows}x{cols}",
                    i + 1,
                    r.nrows(),
                    r.ncols()
                )));
            }
            ensure_finite(r)?;
        }
        Ok(LaurentTail { rows, cols, coeffs })
    }

    pub fn zero(rows: usize, cols: usize, depth: usize) -> Result<Self> {
        Self::new(vec![CMatrix::zeros(rows, cols); depth])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored blocks `2k`.
    pub fn depth(&self) -> usize {
        self.coeffs.len()
    }

    /// `R₋ᵢ` for `i ≥ 1`.
    pub fn block(&self, i: usize) -> &CMatrix {
        assert!(i >= 1 && i <= self.coeffs.len(), "tail index {i} out of range");
        &self.coeffs[i - 1]
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        if z.norm() == 0.0 {
            return Err(Error::Domain("Laurent tail cannot be evaluated at 0".into()));
        }
        let w = z.inv();
        let mut acc = CMatrix::zeros(self.rows, self.cols);
        for r in self.coeffs.iter().rev() {
            acc = (acc + r) * w;
        }
        Ok(acc)
    }
}

pub fn eval_laurent(tail: &LaurentTail, z: Complex64) -> Result<CMatrix> {
    tail.eval(z)
}

/// `C (A − λE)⁻¹ B` with invertible `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceTriple {
    pub a: CMatrix,
    pub e: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl StateSpaceTriple {
    pub fn new(a: CMatrix, e: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let q = a.nrows();
        if !a.is_square() || e.shape() != (q, q) || b.nrows() != q || c.ncols() != q {
            return Err(Error::Shape(format!(
                "state-space blocks inconsistent: A {:?}, E {:?}, B {:?}, C {:?}",
                a.shape(),
                e.shape(),
                b.shape(),
                c.shape()
            )));
        }
        for m in [&a, &e, &b, &c] {
            ensure_finite(m)?;
        }
        if q > 0 {
            let s = numkernel::singular_values(&e);
            if s[q - 1] <= q as f64 * f64::EPSILON * s[0] || s[0] == 0.0 {
                return Err(Error::Input(format!(
                    "E must be invertible (smallest singular value {:.3e})",
                    s[q - 1]
                )));
            }
        }
        Ok(StateSpaceTriple { a, e, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn rows(&self) -> usize {
        self.c.nrows()
    }

    pub fn cols(&self) -> usize {
        self.b.ncols()
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let pencil = &self.a - &self.e * z;
        Ok(&self.c * lin_solve(&pencil, &self.b)?)
    }

    /// Expansion at infinity: `R₋ⱼ = −C (E⁻¹A)^{j−1} E⁻¹ B`.
    pub fn laurent_tail(&self, depth: usize) -> Result<LaurentTail> {
        let e_inv_a = lin_solve(&self.e, &self.a)?;
        let mut x = lin_solve(&self.e, &self.b)?;
        let mut blocks = Vec::with_capacity(depth);
        for _ in 0..depth {
            blocks.push(-(&self.c * &x));
            x = &e_inv_a * x;
        }
        LaurentTail::new(blocks)
    }
}

pub fn eval_statespace(ss: &StateSpaceTriple, z: Complex64) -> Result<CMatrix> {
    ss.eval(z)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StrictlyProper {
    Tail(LaurentTail),
    StateSpace(StateSpaceTriple),
}

impl StrictlyProper {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            StrictlyProper::Tail(t) => (t.rows(), t.cols()),
            StrictlyProper::StateSpace(s) => (s.rows(), s.cols()),
        }
    }

    /// For a tail this is the truncated sum.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        match self {
            StrictlyProper::Tail(t) => t.eval(z),
            StrictlyProper::StateSpace(s) => s.eval(z),
        }
    }
}

/// `R(λ) = P(λ) + R_sp(λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    pub poly: PolyMatrix,
    pub proper: Option<StrictlyProper>,
}

impl RationalMatrix {
    pub fn new(poly: PolyMatrix, proper: Option<StrictlyProper>) -> Result<Self> {
        if let Some(sp) = &proper {
            if sp.shape() != (poly.rows(), poly.cols()) {
                return Err(Error::Shape(format!(
                    "polynomial part is {}x{} but strictly proper part is {:?}",
                    poly.rows(),
                    poly.cols(),
                    sp.shape()
                )));
            }
        }
        Ok(RationalMatrix { poly, proper })
    }

    pub fn polynomial(poly: PolyMatrix) -> Self {
        RationalMatrix { poly, proper: None }
    }

    pub fn rows(&self) -> usize {
        self.poly.rows()
    }

    pub fn cols(&self) -> usize {
        self.poly.cols()
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let mut v = self.poly.eval(z);
        if let Some(sp) = &self.proper {
            v += sp.eval(z)?;
        }
        Ok(v)
    }
}

/// The four self-conjugate structures, plus `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureTag {
    #[default]
    None,
    Hermitian,
    SkewHermitian,
    ParaHermitian,
    ParaSkewHermitian,
}

impl StructureTag {
    pub const STRUCTURED: [StructureTag; 4] = [
        StructureTag::Hermitian,
        StructureTag::SkewHermitian,
        StructureTag::ParaHermitian,
        StructureTag::ParaSkewHermitian,
    ];

    pub fn is_structured(self) -> bool {
        self != StructureTag::None
    }

    pub fn is_para(self) -> bool {
        matches!(self, StructureTag::ParaHermitian | StructureTag::ParaSkewHermitian)
    }

    /// `s` with `Xᵢ* = s Xᵢ` for the coefficient of `λ^i` (or of `λ^{-i}` in a
    /// Laurent tail; the table is the same).
    pub fn coefficient_sign(self, i: usize) -> f64 {
        let odd = i % 2 == 1;
        match self {
            StructureTag::None => panic!("unstructured tag has no coefficient sign"),
            StructureTag::Hermitian => 1.0,
            StructureTag::SkewHermitian => -1.0,
            StructureTag::ParaHermitian => {
                if odd {
                    -1.0
                } else {
                    1.0
                }
            }
            StructureTag::ParaSkewHermitian => {
                if odd {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureTag::None => "none",
            StructureTag::Hermitian => "hermitian",
            StructureTag::SkewHermitian => "skew_hermitian",
            StructureTag::ParaHermitian => "para_hermitian",
            StructureTag::ParaSkewHermitian => "para_skew_hermitian",
        }
    }
}

impl fmt::Display for StructureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "" => Ok(StructureTag::None),
            "hermitian" | "symmetric" => Ok(StructureTag::Hermitian),
            "skew_hermitian" | "skew_symmetric" => Ok(StructureTag::SkewHermitian),
            "para_hermitian" | "para_symmetric" => Ok(StructureTag::ParaHermitian),
            "para_skew_hermitian" | "para_skew_symmetric" => Ok(StructureTag::ParaSkewHermitian),
            other => Err(Error::Input(format!("unknown structure tag {other:?}"))),
        }
    }
}

/// Normal rank together with a nondecreasing list of structural indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralIndices {
    pub normal_rank: usize,
    pub indices: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureCheck {
    pub ok: bool,
    pub defect: f64,
}

fn structure_defect<'a>(
    blocks: impl Iterator<Item = (usize, &'a CMatrix)>,
    tag: StructureTag,
) -> StructureCheck {
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, x) in blocks {
        let s = tag.coefficient_sign(i);
        defect = defect.max(norm2(&(x.adjoint() - x * numkernel::c(s, 0.0))));
        scale = scale.max(norm2(x));
    }
    StructureCheck {
        ok: defect <= STRUCTURE_RELATIVE * scale,
        defect,
    }
}

fn require_square(rows: usize, cols: usize, tag: StructureTag) -> Result<()> {
    if tag.is_structured() && rows != cols {
        return Err(Error::Shape(format!("{tag} structure needs a square matrix, got {rows}x{cols}")));
    }
    Ok(())
}

/// Defect `max_i ‖Pᵢ* − sᵢPᵢ‖₂` against the coefficient signs of `tag`.
pub fn check_structure_poly(p: &PolyMatrix, tag: StructureTag) -> Result<StructureCheck> {
    require_square(p.rows(), p.cols(), tag)?;
    if !tag.is_structured() {
        return Ok(StructureCheck { ok: true, defect: 0.0 });
    }
    Ok(structure_defect(p.coeffs().iter().enumerate(), tag))
}

pub fn check_structure_laurent(tail: &LaurentTail, tag: StructureTag) -> Result<StructureCheck> {
    require_square(tail.rows(), tail.cols(), tag)?;
    if !tag.is_structured() {
        return Ok(StructureCheck { ok: true, defect: 0.0 });
    }
    Ok(structure_defect(
        tail.blocks().iter().enumerate().map(|(i, r)| (i + 1, r)),
        tag,
    ))
}

/// `rev₁(λL₁ + L₀) = L₁ + λL₀`, returned as the new `(L0, L1)` pair.
pub fn reverse_pencil(l0: &CMatrix, l1: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if l0.shape() != l1.shape() {
        return Err(Error::Shape(format!(
            "pencil coefficients differ in shape: {:?} vs {:?}",
            l0.shape(),
            l1.shape()
        )));
    }
    Ok((l1.clone(), l0.clone()))
}

/// Random matrix `X` with `X* = sign·X`, optionally of the given rank.
fn random_signed<R: rand::Rng>(rng: &mut R, m: usize, sign: f64, rank: Option<usize>) -> CMatrix {
    let base = match rank {
        Some(r) => {
            let w = random::matrix(rng, m, r);
            let d = CMatrix::from_fn(r, r, |i, j| {
                if i == j {
                    // keep the planted singular values away from zero
                    let v: f64 = rng.random_range(0.5..2.0);
                    numkernel::c(if rng.random_bool(0.5) { v } else { -v }, 0.0)
                } else {
                    ZERO
                }
            });
            &w * d * w.adjoint()
        }
        None => random::matrix(rng, m, m),
    };
    let x = if sign < 0.0 { base * J } else { base };
    (&x + x.adjoint() * numkernel::c(sign, 0.0)) * numkernel::c(0.5, 0.0)
}

/// Random `m×m` polynomial matrix of exact degree `d` with the coefficient
/// symmetries of `tag`. `leading_rank` plants the rank of `P_d`.
pub fn random_structured_poly(
    m: usize,
    d: usize,
    tag: StructureTag,
    seed: u64,
    leading_rank: Option<usize>,
) -> PolyMatrix {
    assert!(m >= 1, "need at least one row");
    if let Some(r) = leading_rank {
        assert!(r >= 1 && r <= m, "leading rank must be in 1..=m");
    }
    let mut rng = random::rng(seed);
    let coeffs = (0..=d)
        .map(|i| {
            let rank = if i == d { leading_rank } else { None };
            if tag.is_structured() {
                random_signed(&mut rng, m, tag.coefficient_sign(i), rank)
            } else {
                match rank {
                    Some(r) => random::low_rank(&mut rng, m, m, r),
                    None => random::matrix(&mut rng, m, m),
                }
            }
        })
        .collect();
    PolyMatrix::new(coeffs).expect("generated coefficients are consistent")
}

/// Random tail with `depth` blocks and the Laurent signs of `tag`.
/// `trailing_rank` plants the rank of the deepest block.
pub fn random_structured_tail(
    m: usize,
    depth: usize,
    tag: StructureTag,
    seed: u64,
    trailing_rank: Option<usize>,
) -> Result<LaurentTail> {
    assert!(m >= 1, "need at least one row");
    let mut rng = random::rng(seed);
    let blocks = (1..=depth)
        .map(|i| {
            let rank = if i == depth { trailing_rank } else { None };
            if tag.is_structured() {
                random_signed(&mut rng, m, tag.coefficient_sign(i), rank)
            } else {
                match rank {
                    Some(r) => random::low_rank(&mut rng, m, m, r),
                    None => random::matrix(&mut rng, m, m),
                }
            }
        })
        .collect();
    LaurentTail::new(blocks)
}

/// Unstructured random `rows×cols` polynomial matrix of degree `d`.
pub fn random_poly(rows: usize, cols: usize, d: usize, seed: u64, leading_rank: Option<usize>) -> PolyMatrix {
    let mut rng = random::rng(seed);
    let coeffs = (0..=d)
        .map(|i| match (i == d, leading_rank) {
            (true, Some(r)) => random::low_rank(&mut rng, rows, cols, r),
            _ => random::matrix(&mut rng, rows, cols),
        })
        .collect();
    PolyMatrix::with_shape(rows, cols, coeffs).expect("generated coefficients are consistent")
}

/// Random minimal triple with `E = I` and a stable, well-separated spectrum.
pub fn random_state_space(q: usize, rows: usize, cols: usize, seed: u64) -> StateSpaceTriple {
    let mut rng = random::rng(seed);
    let w = random::matrix(&mut rng, q, q) + CMatrix::identity(q, q) * numkernel::c(2.0, 0.0);
    let spectrum: Vec<Complex64> = (0..q)
        .map(|i| {
            let angle = std::f64::consts::TAU * (i as f64 + 0.3 * rng.random::<f64>()) / q.max(1) as f64;
            Complex64::from_polar(0.4 + 0.5 * rng.random::<f64>(), angle)
        })
        .collect();
    let lam = CMatrix::from_fn(q, q, |i, j| if i == j { spectrum[i] } else { ZERO });
    let a = &w * lam * w.clone().try_inverse().expect("diagonally dominant");
    let b = random::matrix(&mut rng, q, cols);
    let c = random::matrix(&mut rng, rows, q);
    StateSpaceTriple::new(a, CMatrix::identity(q, q), b, c).expect("consistent shapes")
}
