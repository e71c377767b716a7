//! Pencil constructions: companion-like pencils, the deflated strongly
//! minimal linearization, its structured and quadratic variants, Hankel and
//! state-space realizations of strictly proper parts, and their combination.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analyze::{self, MinimalityCertificate, MinimalityOptions};
use crate::error::{Error, Result};
use crate::hankel::{
    build_h_pair_k, build_s_poly, build_s_rat, build_t, choose_k, compress_structured,
    compress_unstructured, CompressionResult, KChoice, Layout,
};
use crate::numkernel::{self, block2x2, block_diag, c, hstack, lin_solve, norm2, vstack, CMatrix, RankTolerance};
use crate::polyrat::{
    check_structure_laurent, check_structure_poly, LaurentTail, PolyMatrix, RationalMatrix, StateSpaceTriple,
    StrictlyProper, StructureTag,
};

/// `L(λ) = [[A(λ), −B(λ)], [C(λ), D(λ)]]` with `X(λ) = λX₁ − X₀` for each block.
///
/// The state block is `p_rows × p_cols`; it is square for every realization,
/// but the intermediate pencil `L_s` of a rectangular `P` has a rectangular one.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystemMatrix {
    pub a0: CMatrix,
    pub a1: CMatrix,
    pub b0: CMatrix,
    pub b1: CMatrix,
    pub c0: CMatrix,
    pub c1: CMatrix,
    pub d0: CMatrix,
    pub d1: CMatrix,
}

impl LinearSystemMatrix {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a0: CMatrix,
        a1: CMatrix,
        b0: CMatrix,
        b1: CMatrix,
        c0: CMatrix,
        c1: CMatrix,
        d0: CMatrix,
        d1: CMatrix,
    ) -> Result<Self> {
        let (pr, pc) = a0.shape();
        let (m, n) = d0.shape();
        let checks = [
            ("A1", a1.shape(), (pr, pc)),
            ("B0", b0.shape(), (pr, n)),
            ("B1", b1.shape(), (pr, n)),
            ("C0", c0.shape(), (m, pc)),
            ("C1", c1.shape(), (m, pc)),
            ("D1", d1.shape(), (m, n)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Shape(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        for x in [&a0, &a1, &b0, &b1, &c0, &c1, &d0, &d1] {
            numkernel::ensure_finite(x)?;
        }
        Ok(LinearSystemMatrix { a0, a1, b0, b1, c0, c1, d0, d1 })
    }

    /// Splits a pencil `L₀ + λL₁` with the given state block size.
    pub fn from_pencil_coeffs(l0: &CMatrix, l1: &CMatrix, p_rows: usize, p_cols: usize) -> Result<Self> {
        if l0.shape() != l1.shape() || l0.nrows() < p_rows || l0.ncols() < p_cols {
            return Err(Error::Shape(format!(
                "pencil coefficients {:?} and {:?} cannot hold a {p_rows}x{p_cols} state block",
                l0.shape(),
                l1.shape()
            )));
        }
        let (rows, cols) = l0.shape();
        let (m, n) = (rows - p_rows, cols - p_cols);
        let blk = |x: &CMatrix, r: usize, c: usize, h: usize, w: usize| x.view((r, c), (h, w)).into_owned();
        Self::new(
            -blk(l0, 0, 0, p_rows, p_cols),
            blk(l1, 0, 0, p_rows, p_cols),
            blk(l0, 0, p_cols, p_rows, n),
            -blk(l1, 0, p_cols, p_rows, n),
            -blk(l0, p_rows, 0, m, p_cols),
            blk(l1, p_rows, 0, m, p_cols),
            -blk(l0, p_rows, p_cols, m, n),
            blk(l1, p_rows, p_cols, m, n),
        )
    }

    pub fn state_rows(&self) -> usize {
        self.a0.nrows()
    }

    pub fn state_cols(&self) -> usize {
        self.a0.ncols()
    }

    /// State dimension `p` (rows of the state block).
    pub fn state_dim(&self) -> usize {
        self.state_rows()
    }

    pub fn outputs(&self) -> usize {
        self.d0.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d0.ncols()
    }

    /// `(L₀, L₁)` with `L(λ) = L₀ + λL₁`. This is the only place the block
    /// signs are applied.
    pub fn pencil_coeffs(&self) -> (CMatrix, CMatrix) {
        let l1 = block2x2(&self.a1, &(-&self.b1), &self.c1, &self.d1);
        let l0 = block2x2(&(-&self.a0), &self.b0, &(-&self.c0), &(-&self.d0));
        (l0, l1)
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        let (l0, l1) = self.pencil_coeffs();
        l0 + l1 * z
    }

    pub fn a_at(&self, z: Complex64) -> CMatrix {
        &self.a1 * z - &self.a0
    }

    pub fn b_at(&self, z: Complex64) -> CMatrix {
        &self.b1 * z - &self.b0
    }

    pub fn c_at(&self, z: Complex64) -> CMatrix {
        &self.c1 * z - &self.c0
    }

    pub fn d_at(&self, z: Complex64) -> CMatrix {
        &self.d1 * z - &self.d0
    }

    /// `D(z) + C(z) A(z)⁻¹ B(z)`.
    pub fn transfer(&self, z: Complex64) -> Result<CMatrix> {
        if self.state_rows() != self.state_cols() {
            return Err(Error::Shape(format!(
                "transfer function needs a square state block, got {}x{}",
                self.state_rows(),
                self.state_cols()
            )));
        }
        let d = self.d_at(z);
        if self.state_rows() == 0 {
            return Ok(d);
        }
        Ok(d + self.c_at(z) * lin_solve(&self.a_at(z), &self.b_at(z))?)
    }

    /// Largest coefficient norm of the assembled pencil.
    pub fn scale(&self) -> f64 {
        let (l0, l1) = self.pencil_coeffs();
        norm2(&l0).max(norm2(&l1))
    }
}

fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn require_degree_two(p: &PolyMatrix) -> Result<usize> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::Degenerate(format!(
            "construction needs degree at least 2, got {d}"
        )));
    }
    Ok(d)
}

/// `[P_d; P_{d−1}; …; P₂]`
fn stacked_tail_coeffs(p: &PolyMatrix) -> CMatrix {
    let d = p.degree();
    let blocks: Vec<CMatrix> = (2..=d).rev().map(|i| p.coeff(i)).collect();
    vstack(&blocks.iter().collect::<Vec<_>>())
}

/// `[P_d, P_{d−1}, …, P₂]`
fn row_tail_coeffs(p: &PolyMatrix) -> CMatrix {
    let d = p.degree();
    let blocks: Vec<CMatrix> = (2..=d).rev().map(|i| p.coeff(i)).collect();
    hstack(&blocks.iter().collect::<Vec<_>>())
}

/// Block bidiagonal `[[I, 0], …]` with identity blocks shifted by one block.
fn shift_blocks(nb: usize, size: usize, upper: bool) -> CMatrix {
    let mut out = zeros(nb * size, nb * size);
    for i in 0..nb.saturating_sub(1) {
        let (r, c) = if upper { (i, i + 1) } else { (i + 1, i) };
        out.view_mut((r * size, c * size), (size, size)).fill_with_identity();
    }
    out
}

/// Row companion-like pencil: controllable at infinity, observable there iff
/// `P_d` has full column rank.
pub fn build_lr(p: &PolyMatrix) -> Result<LinearSystemMatrix> {
    let d = require_degree_two(p)?;
    let (m, n) = (p.rows(), p.cols());
    let q = (d - 1) * n;
    let mut b1 = zeros(q, n);
    b1.view_mut((q - n, 0), (n, n)).copy_from(&(-eye(n)));
    LinearSystemMatrix::new(
        eye(q),
        shift_blocks(d - 1, n, true),
        zeros(q, n),
        b1,
        zeros(m, q),
        row_tail_coeffs(p),
        -p.coeff(0),
        p.coeff(1),
    )
}

/// Column companion-like pencil, dual to [`build_lr`].
pub fn build_lc(p: &PolyMatrix) -> Result<LinearSystemMatrix> {
    let d = require_degree_two(p)?;
    let (m, n) = (p.rows(), p.cols());
    let q = (d - 1) * m;
    let mut c1 = zeros(m, q);
    c1.view_mut((0, q - m), (m, m)).fill_with_identity();
    LinearSystemMatrix::new(
        eye(q),
        shift_blocks(d - 1, m, false),
        zeros(q, n),
        -stacked_tail_coeffs(p),
        zeros(m, q),
        c1,
        -p.coeff(0),
        p.coeff(1),
    )
}

/// Block anti-triangular pencil with `A_s(λ) = λA₁ − T`; its state block is
/// `(d−1)m × (d−1)n`.
pub fn build_ls(p: &PolyMatrix) -> Result<LinearSystemMatrix> {
    let d = require_degree_two(p)?;
    let (m, n) = (p.rows(), p.cols());
    let nb = d - 1;
    let t = build_t(p)?;
    let mut a1 = zeros(nb * m, nb * n);
    for i in 0..nb {
        for j in 0..nb {
            let idx = 2 * d - 1 - i - j;
            if idx <= d {
                a1.view_mut((i * m, j * n), (m, n)).copy_from(&p.coeff(idx));
            }
        }
    }
    LinearSystemMatrix::new(
        t,
        a1,
        zeros(nb * m, n),
        -stacked_tail_coeffs(p),
        zeros(m, nb * n),
        row_tail_coeffs(p),
        -p.coeff(0),
        p.coeff(1),
    )
}

/// Applies `diag(U_sel*, I)` on the left and `diag(V_sel, I)` on the right.
fn project(ls: &LinearSystemMatrix, u_sel: &CMatrix, v_sel: &CMatrix) -> Result<LinearSystemMatrix> {
    let uh = u_sel.adjoint();
    LinearSystemMatrix::new(
        &uh * &ls.a0 * v_sel,
        &uh * &ls.a1 * v_sel,
        &uh * &ls.b0,
        &uh * &ls.b1,
        &ls.c0 * v_sel,
        &ls.c1 * v_sel,
        ls.d0.clone(),
        ls.d1.clone(),
    )
}

/// Norm of the rows and columns of `diag(U*, I) L_s diag(V, I)` that the
/// deflation discards. Zero in exact arithmetic.
pub fn deflation_residual(p: &PolyMatrix, comp: &CompressionResult) -> Result<f64> {
    let ls = build_ls(p)?;
    let full = project(&ls, &comp.u, &comp.v)?;
    let (zr, zc) = (comp.u.ncols() - comp.rank, comp.v.ncols() - comp.rank);
    let (l0, l1) = full.pencil_coeffs();
    let mut worst: f64 = 0.0;
    for l in [&l0, &l1] {
        worst = worst.max(norm2(&l.rows(0, zr).into_owned()));
        worst = worst.max(norm2(&l.columns(0, zc).into_owned()));
    }
    Ok(worst)
}

/// Strongly minimal linearization obtained by compressing `L_s` with the
/// null spaces of `T`. State dimension equals `rank T`.
pub fn deflate_ls(p: &PolyMatrix, tol: RankTolerance) -> Result<(LinearSystemMatrix, CompressionResult)> {
    require_degree_two(p)?;
    let comp = compress_unstructured(&build_t(p)?, Layout::ZerosFirst, tol)?;
    let lin = project(&build_ls(p)?, &comp.u_sel(), &comp.v_sel())?;
    Ok((lin, comp))
}

/// Structure-preserving variant of [`deflate_ls`]. The returned pencil has
/// had its coefficients symmetrized; the pre-symmetrization defect is in
/// the third slot.
pub fn deflate_ls_structured(
    p: &PolyMatrix,
    tag: StructureTag,
    tol: RankTolerance,
) -> Result<(LinearSystemMatrix, CompressionResult, f64)> {
    let d = require_degree_two(p)?;
    ensure_structure_poly(p, tag)?;
    let s = build_s_poly(d, p.rows());
    let comp = compress_structured(&build_t(p)?, tag, Some(&s), Layout::ZerosFirst, tol)?;
    let lin = project(&build_ls(p)?, &comp.u_sel(), &comp.v_sel())?;
    let (lin, defect) = symmetrize(&lin, tag)?;
    Ok((lin, comp, defect))
}

fn ensure_structure_poly(p: &PolyMatrix, tag: StructureTag) -> Result<()> {
    let chk = check_structure_poly(p, tag)?;
    if !chk.ok {
        return Err(Error::Structure {
            what: format!("polynomial part is not {tag}"),
            defect: chk.defect,
        });
    }
    Ok(())
}

fn ensure_structure_tail(t: &LaurentTail, tag: StructureTag) -> Result<()> {
    let chk = check_structure_laurent(t, tag)?;
    if !chk.ok {
        return Err(Error::Structure {
            what: format!("strictly proper part is not {tag}"),
            defect: chk.defect,
        });
    }
    Ok(())
}

/// Averages each pencil coefficient with its signed adjoint so that
/// `L₀* = s₀L₀` and `L₁* = s₁L₁` hold exactly. Returns the largest defect
/// `‖Lᵢ* − sᵢLᵢ‖₂` seen before averaging.
pub fn symmetrize(lin: &LinearSystemMatrix, tag: StructureTag) -> Result<(LinearSystemMatrix, f64)> {
    if !tag.is_structured() {
        return Ok((lin.clone(), 0.0));
    }
    if lin.state_rows() != lin.state_cols() || lin.outputs() != lin.inputs() {
        return Err(Error::Shape("structured pencils must be square with a square state block".into()));
    }
    let (l0, l1) = lin.pencil_coeffs();
    let mut defect: f64 = 0.0;
    let mut fixed = Vec::with_capacity(2);
    for (i, l) in [l0, l1].into_iter().enumerate() {
        let s = c(tag.coefficient_sign(i), 0.0);
        defect = defect.max(norm2(&(l.adjoint() - &l * s)));
        fixed.push((&l + l.adjoint() * s) * c(0.5, 0.0));
    }
    let p = lin.state_rows();
    let out = LinearSystemMatrix::from_pencil_coeffs(&fixed[0], &fixed[1], p, p)?;
    Ok((out, defect))
}

/// Largest `‖Lᵢ* − sᵢLᵢ‖₂` of a pencil against the signs of `tag`.
pub fn pencil_structure_defect(lin: &LinearSystemMatrix, tag: StructureTag) -> f64 {
    if !tag.is_structured() {
        return 0.0;
    }
    let (l0, l1) = lin.pencil_coeffs();
    if !l0.is_square() {
        return f64::INFINITY;
    }
    [l0, l1]
        .iter()
        .enumerate()
        .map(|(i, l)| norm2(&(l.adjoint() - l * c(tag.coefficient_sign(i), 0.0))))
        .fold(0.0, f64::max)
}

/// `[[−T̂, λT̂V₂*], [λU₂T̂, λP₁ + P₀]]` from a compression `P₂ = U₂T̂V₂*`;
/// size `(r₂+m) × (r₂+n)`.
pub fn quad_lowrank(p: &PolyMatrix, tol: RankTolerance) -> Result<LinearSystemMatrix> {
    if p.degree() != 2 {
        return Err(Error::Input(format!("quadratic construction needs degree 2, got {}", p.degree())));
    }
    let comp = compress_unstructured(&p.coeff(2), Layout::ZerosFirst, tol)?;
    if comp.rank == 0 {
        let lin = PolyMatrix::with_shape(p.rows(), p.cols(), vec![p.coeff(0), p.coeff(1)])?;
        return Ok(trivial_linearization(&lin));
    }
    let (u2, v2, t_hat) = (comp.u_sel(), comp.v_sel(), &comp.core);
    let r = comp.rank;
    LinearSystemMatrix::new(
        t_hat.clone(),
        zeros(r, r),
        zeros(r, p.cols()),
        -(t_hat * v2.adjoint()),
        zeros(p.rows(), r),
        u2 * t_hat,
        -p.coeff(0),
        p.coeff(1),
    )
}

/// `[[−I, λUfac*], [λLfac, λP₁ + P₀]]` for `P₂ = Lfac·Ufac*`.
pub fn quad_lowrank_factored(p1: &CMatrix, p0: &CMatrix, lfac: &CMatrix, ufac: &CMatrix) -> Result<LinearSystemMatrix> {
    let r = lfac.ncols();
    if ufac.ncols() != r || lfac.nrows() != p0.nrows() || ufac.nrows() != p0.ncols() || p1.shape() != p0.shape() {
        return Err(Error::Shape(format!(
            "factors {:?}, {:?} do not fit coefficients {:?}",
            lfac.shape(),
            ufac.shape(),
            p0.shape()
        )));
    }
    for (name, f) in [("L", lfac), ("U", ufac)] {
        if numkernel::rank_of(f, RankTolerance::default()) < r {
            return Err(Error::Input(format!("factor {name} does not have full column rank {r}")));
        }
    }
    LinearSystemMatrix::new(
        eye(r),
        zeros(r, r),
        zeros(r, p0.ncols()),
        -ufac.adjoint(),
        zeros(p0.nrows(), r),
        lfac.clone(),
        -p0,
        p1.clone(),
    )
}

/// `p = 0` and `D(λ) = P(λ)` for `deg P ≤ 1`.
pub fn trivial_linearization(p: &PolyMatrix) -> LinearSystemMatrix {
    assert!(p.degree() <= 1, "trivial linearization needs degree at most 1");
    let (m, n) = (p.rows(), p.cols());
    LinearSystemMatrix::new(
        zeros(0, 0),
        zeros(0, 0),
        zeros(0, n),
        zeros(0, n),
        zeros(m, 0),
        zeros(m, 0),
        -p.coeff(0),
        p.coeff(1),
    )
    .expect("shapes are consistent")
}

/// Assembles `[[U₁*H_σV₁ − λĤ, ĤV₁₁*], [U₁₁Ĥ, 0]]` from a core-first compression.
fn hankel_realization(hs: &CMatrix, comp: &CompressionResult, m: usize, n: usize) -> Result<LinearSystemMatrix> {
    let (u1, v1, h_hat) = (comp.u_sel(), comp.v_sel(), &comp.core);
    let r = comp.rank;
    let u11 = u1.rows(0, m).into_owned();
    let v11 = v1.rows(0, n).into_owned();
    LinearSystemMatrix::new(
        -(u1.adjoint() * hs * &v1),
        -h_hat,
        h_hat * v11.adjoint(),
        zeros(r, n),
        -(u11 * h_hat),
        zeros(m, r),
        zeros(m, n),
        zeros(m, n),
    )
}

/// Strongly minimal realization of a strictly proper part from its first
/// `2k` expansion blocks; state dimension `rank H`.
pub fn realize_strictly_proper(
    tail: &LaurentTail,
    k: usize,
    tol: RankTolerance,
) -> Result<(LinearSystemMatrix, CompressionResult)> {
    let (h, hs) = build_h_pair_k(tail, k)?;
    let comp = compress_unstructured(&h, Layout::CoreFirst, tol)?;
    let lin = hankel_realization(&hs, &comp, tail.rows(), tail.cols())?;
    Ok((lin, comp))
}

/// Structure-preserving variant with `U = V` or `U = SV`; the pencil is
/// symmetrized and the pre-symmetrization defect returned.
pub fn realize_strictly_proper_structured(
    tail: &LaurentTail,
    tag: StructureTag,
    k: usize,
    tol: RankTolerance,
) -> Result<(LinearSystemMatrix, CompressionResult, f64)> {
    ensure_structure_tail(tail, tag)?;
    let (h, hs) = build_h_pair_k(tail, k)?;
    let s = build_s_rat(k, tail.rows());
    let comp = compress_structured(&h, tag, Some(&s), Layout::CoreFirst, tol)?;
    let lin = hankel_realization(&hs, &comp, tail.rows(), tail.cols())?;
    let (lin, defect) = symmetrize(&lin, tag)?;
    Ok((lin, comp, defect))
}

/// `[[A − λE, −B], [C, 0]]`, whose transfer function is `C(A − λE)⁻¹B`.
pub fn from_state_space(ss: &StateSpaceTriple) -> LinearSystemMatrix {
    let (q, m, n) = (ss.state_dim(), ss.rows(), ss.cols());
    LinearSystemMatrix::new(
        -&ss.a,
        -&ss.e,
        -&ss.b,
        zeros(q, n),
        -&ss.c,
        zeros(m, q),
        zeros(m, n),
        zeros(m, n),
    )
    .expect("validated triple")
}

/// Stacks the states of a polynomial-part pencil and a strictly proper
/// realization block-diagonally.
pub fn combine(lpoly: &LinearSystemMatrix, lsp: &LinearSystemMatrix) -> Result<LinearSystemMatrix> {
    if (lpoly.outputs(), lpoly.inputs()) != (lsp.outputs(), lsp.inputs()) {
        return Err(Error::Shape(format!(
            "cannot combine a {}x{} pencil with a {}x{} one",
            lpoly.outputs(),
            lpoly.inputs(),
            lsp.outputs(),
            lsp.inputs()
        )));
    }
    if lsp.d0.iter().chain(lsp.d1.iter()).any(|z| *z != numkernel::ZERO) {
        return Err(Error::Input("strictly proper realization must have D = 0".into()));
    }
    LinearSystemMatrix::new(
        block_diag(&lpoly.a0, &lsp.a0),
        block_diag(&lpoly.a1, &lsp.a1),
        vstack(&[&lpoly.b0, &lsp.b0]),
        vstack(&[&lpoly.b1, &lsp.b1]),
        hstack(&[&lpoly.c0, &lsp.c0]),
        hstack(&[&lpoly.c1, &lsp.c1]),
        lpoly.d0.clone(),
        lpoly.d1.clone(),
    )
}

#[derive(Clone, Debug, Default)]
pub struct LinearizeOptions {
    pub tol: RankTolerance,
    /// Hankel order for a tail; chosen by rank stabilization when absent.
    pub k: Option<usize>,
    /// Options for the strong minimality certificate in the report.
    pub minimality: MinimalityOptions,
}

/// How each part of a rational matrix was linearized.
#[derive(Clone, Debug, Default)]
pub struct LinearizeReport {
    pub poly_route: &'static str,
    pub proper_route: Option<&'static str>,
    pub poly_compression: Option<CompressionResult>,
    pub proper_compression: Option<CompressionResult>,
    pub k_choice: Option<KChoice>,
    /// Coefficient symmetry defect before the symmetrization pass.
    pub symmetry_defect: Option<f64>,
    pub certificate: Option<MinimalityCertificate>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub polynomial: String,
    pub strictly_proper: Option<String>,
}

pub fn linearize_rational(
    r: &RationalMatrix,
    tag: StructureTag,
    tol: RankTolerance,
) -> Result<(LinearSystemMatrix, LinearizeReport)> {
    linearize_rational_with(
        r,
        tag,
        &LinearizeOptions {
            tol,
            ..Default::default()
        },
    )
}

fn pick_k(tail: &LaurentTail, opts: &LinearizeOptions, report: &mut LinearizeReport) -> Result<usize> {
    if let Some(k) = opts.k {
        return Ok(k);
    }
    if tail.depth() < 4 {
        return Ok(tail.depth() / 2);
    }
    let kc = choose_k(tail, opts.tol)?;
    if !kc.stabilized {
        report.warnings.push(format!(
            "Hankel rank has not stabilized within the {} tail blocks given",
            tail.depth()
        ));
    }
    report.k_choice = Some(kc);
    Ok(kc.k_used)
}

/// Linearizes `P + R_sp` part by part and stacks the results. With a
/// structure tag every part is built structure-preserving.
pub fn linearize_rational_with(
    r: &RationalMatrix,
    tag: StructureTag,
    opts: &LinearizeOptions,
) -> Result<(LinearSystemMatrix, LinearizeReport)> {
    opts.tol.validate()?;
    let mut report = LinearizeReport::default();
    let mut defect: f64 = 0.0;

    let lpoly = if r.poly.degree() <= 1 {
        if tag.is_structured() {
            ensure_structure_poly(&r.poly, tag)?;
        }
        report.poly_route = "trivial";
        trivial_linearization(&r.poly)
    } else if tag.is_structured() {
        let (lin, comp, dfct) = deflate_ls_structured(&r.poly, tag, opts.tol)?;
        report.poly_route = "deflated_structured";
        defect = defect.max(dfct);
        report.poly_compression = Some(comp);
        lin
    } else {
        let (lin, comp) = deflate_ls(&r.poly, opts.tol)?;
        report.poly_route = "deflated";
        report.poly_compression = Some(comp);
        lin
    };

    let lsp = match &r.proper {
        None => None,
        Some(StrictlyProper::StateSpace(ss)) if !tag.is_structured() => {
            report.proper_route = Some("state_space");
            Some(from_state_space(ss))
        }
        Some(sp) => {
            let tail = match sp {
                StrictlyProper::Tail(t) => t.clone(),
                // the structured route needs Hankel data; 2q+2 blocks cover rank q
                StrictlyProper::StateSpace(ss) => ss.laurent_tail(2 * ss.state_dim() + 2)?,
            };
            let k = pick_k(&tail, opts, &mut report)?;
            if tag.is_structured() {
                let (lin, comp, dfct) = realize_strictly_proper_structured(&tail, tag, k, opts.tol)?;
                report.proper_route = Some("hankel_structured");
                defect = defect.max(dfct);
                report.proper_compression = Some(comp);
                Some(lin)
            } else {
                let (lin, comp) = realize_strictly_proper(&tail, k, opts.tol)?;
                report.proper_route = Some("hankel");
                report.proper_compression = Some(comp);
                Some(lin)
            }
        }
    };

    for comp in [&report.poly_compression, &report.proper_compression].into_iter().flatten() {
        let w = comp.warnings();
        report.warnings.extend(w);
    }

    let lin = match lsp {
        Some(lsp) if lsp.state_dim() > 0 || lpoly.state_dim() == 0 => combine(&lpoly, &lsp)?,
        _ => lpoly,
    };
    if tag.is_structured() {
        report.symmetry_defect = Some(defect);
    }
    report.certificate = Some(analyze::check_strong_minimality(&lin, &opts.minimality)?);
    Ok((lin, report))
}

impl LinearizeReport {
    pub fn routes(&self) -> RouteSummary {
        RouteSummary {
            polynomial: self.poly_route.to_string(),
            strictly_proper: self.proper_route.map(str::to_string),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{diag_real, from_real, random, ONE, ZERO};
    use crate::polyrat::{random_poly, random_state_space, random_structured_poly, random_structured_tail};

    fn example_2_1() -> PolyMatrix {
        PolyMatrix::new(vec![eye(2), eye(2), diag_real(&[0.0, 1.0])]).unwrap()
    }

    fn scalar_poly(coeffs: &[f64]) -> PolyMatrix {
        PolyMatrix::new(coeffs.iter().map(|&v| from_real(1, 1, &[v])).collect()).unwrap()
    }

    fn scalar_tail(values: &[f64]) -> LaurentTail {
        LaurentTail::new(values.iter().map(|&v| from_real(1, 1, &[v])).collect()).unwrap()
    }

    fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
        norm2(&(a - b)) / norm2(b).max(1.0)
    }

    fn assert_transfer_poly(lin: &LinearSystemMatrix, p: &PolyMatrix, tol: f64) {
        let mut rng = random::rng(1234);
        for _ in 0..20 {
            let z = random::point(&mut rng, 0.3, 3.0);
            let err = rel_err(&lin.transfer(z).unwrap(), &p.eval(z));
            assert!(err <= tol, "transfer error {err:e} at {z}");
        }
    }

    /// Equality of pencils up to unit-modulus scaling of rows and columns
    /// of the state block.
    fn same_up_to_phases(a: &CMatrix, b: &CMatrix) -> bool {
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| (x.norm() - y.norm()).abs() < 1e-12)
    }

    #[test]
    fn assembly_round_trip() {
        let mut rng = random::rng(5);
        let m = |r, c, rng: &mut random::TestRng| random::matrix(rng, r, c);
        let lin = LinearSystemMatrix::new(
            m(3, 3, &mut rng),
            m(3, 3, &mut rng),
            m(3, 2, &mut rng),
            m(3, 2, &mut rng),
            m(4, 3, &mut rng),
            m(4, 3, &mut rng),
            m(4, 2, &mut rng),
            m(4, 2, &mut rng),
        )
        .unwrap();
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(LinearSystemMatrix::from_pencil_coeffs(&l0, &l1, 3, 3).unwrap(), lin);
        let z = c(0.3, -1.1);
        let l = lin.eval(z);
        assert!(norm2(&(l.view((0, 0), (3, 3)).into_owned() - lin.a_at(z))) < 1e-14);
        assert!(norm2(&(l.view((0, 3), (3, 2)).into_owned() + lin.b_at(z))) < 1e-14);
        assert!(norm2(&(l.view((3, 0), (4, 3)).into_owned() - lin.c_at(z))) < 1e-14);
        assert!(norm2(&(l.view((3, 3), (4, 2)).into_owned() - lin.d_at(z))) < 1e-14);
        assert!(LinearSystemMatrix::new(eye(2), eye(3), zeros(2, 1), zeros(2, 1), zeros(1, 2), zeros(1, 2), zeros(1, 1), zeros(1, 1)).is_err());
    }

    #[test]
    fn scalar_lambda_squared_companions() {
        let p = scalar_poly(&[0.0, 0.0, 1.0]);
        let want = from_real(2, 2, &[-1.0, 1.0, 1.0, 0.0]);
        for lin in [build_lr(&p).unwrap(), build_lc(&p).unwrap(), deflate_ls(&p, RankTolerance::default()).unwrap().0] {
            let (l0, l1) = lin.pencil_coeffs();
            assert_eq!(l0, diag_real(&[-1.0, 0.0]));
            assert!(same_up_to_phases(&(l1 + &l0), &want));
            assert!((lin.transfer(c(2.0, 0.0)).unwrap()[(0, 0)] - c(4.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn companion_transfers_match() {
        let p = random_poly(3, 2, 4, 8, None);
        assert_transfer_poly(&build_lr(&p).unwrap(), &p, 1e-10);
        assert_transfer_poly(&build_lc(&p).unwrap(), &p, 1e-10);
        let ls = build_ls(&p).unwrap();
        assert_eq!((ls.state_rows(), ls.state_cols()), (9, 6));
    }

    #[test]
    fn ls_example_and_hankel_relations() {
        let ls = build_ls(&example_2_1()).unwrap();
        assert_eq!(ls.a_at(ZERO), diag_real(&[0.0, -1.0]));
        assert_eq!(ls.a_at(c(7.0, 0.0)), diag_real(&[0.0, -1.0]));

        let p = random_poly(3, 2, 4, 31, None);
        let (lr, lc, ls, t) = (build_lr(&p).unwrap(), build_lc(&p).unwrap(), build_ls(&p).unwrap(), build_t(&p).unwrap());
        let mut rng = random::rng(3);
        for _ in 0..5 {
            let z = random::point(&mut rng, 0.1, 2.0);
            let left = hstack(&[&ls.a_at(z), &(-ls.b_at(z))]);
            let right = &t * hstack(&[&lr.a_at(z), &(-lr.b_at(z))]);
            assert!(norm2(&(left - right)) < 1e-12);
            let left = vstack(&[&ls.a_at(z), &ls.c_at(z)]);
            let right = vstack(&[&lc.a_at(z), &lc.c_at(z)]) * &t;
            assert!(norm2(&(left - right)) < 1e-12);
        }
    }

    #[test]
    fn unimodular_sandwich() {
        let p = random_poly(2, 3, 3, 44, None);
        let d = p.degree();
        let ls = build_ls(&p).unwrap();
        let t = build_t(&p).unwrap();
        let mut rng = random::rng(8);
        for _ in 0..10 {
            let z = random::point(&mut rng, 0.2, 2.0);
            let v = CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    ONE
                } else if i == d - 1 {
                    z.powu((d - 1 - j) as u32)
                } else {
                    ZERO
                }
            })
            .kronecker(&eye(2));
            let w = CMatrix::from_fn(d, d, |i, j| if j >= i { z.powu((j - i) as u32) } else { ZERO }).kronecker(&eye(3));
            let lhs = v * ls.eval(z) * w;
            let rhs = block_diag(&(-&t), &p.eval(z));
            assert!(norm2(&(lhs - &rhs)) <= 1e-12 * norm2(&rhs));
        }
    }

    #[test]
    fn deflate_example_2_1() {
        let p = example_2_1();
        let (lin, comp) = deflate_ls(&p, RankTolerance::default()).unwrap();
        assert_eq!(lin.state_dim(), 1);
        let want = from_real(3, 3, &[-1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 2.0]);
        assert!(same_up_to_phases(&lin.eval(ONE), &want));
        assert_transfer_poly(&lin, &p, 1e-12);
        assert!(deflation_residual(&p, &comp).unwrap() < 1e-14);
        assert!((lin.a_at(ZERO) + &comp.core).norm() < 1e-15);
    }

    #[test]
    fn deflate_planted_rank_deficient() {
        let p = random_poly(4, 3, 4, 19, Some(1));
        let (lin, comp) = deflate_ls(&p, RankTolerance::default()).unwrap();
        assert!(comp.rank < 9);
        assert_transfer_poly(&lin, &p, 1e-9);
        assert!(deflation_residual(&p, &comp).unwrap() <= 1e-11 * p.scale());
    }

    #[test]
    fn structured_para_example() {
        let p = PolyMatrix::new(vec![diag_real(&[0.0, -1.0]), zeros(2, 2), diag_real(&[1.0, 0.0])]).unwrap();
        let (lin, _, defect) = deflate_ls_structured(&p, StructureTag::ParaHermitian, RankTolerance::default()).unwrap();
        assert!(defect < 1e-15);
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0, diag_real(&[1.0, 0.0, -1.0]));
        assert_eq!(l1, from_real(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn structured_random_outputs() {
        let cases = [
            (StructureTag::Hermitian, 3, 3),
            (StructureTag::ParaSkewHermitian, 2, 4),
            (StructureTag::SkewHermitian, 2, 3),
            (StructureTag::ParaHermitian, 3, 2),
        ];
        for (tag, m, d) in cases {
            let p = random_structured_poly(m, d, tag, 55, Some(1));
            let (lin, _, defect) = deflate_ls_structured(&p, tag, RankTolerance::default()).unwrap();
            assert!(defect <= 1e-12 * p.scale(), "{tag}: {defect:e}");
            assert_eq!(pencil_structure_defect(&lin, tag), 0.0);
            assert_transfer_poly(&lin, &p, 1e-9);
        }
        let p = random_structured_poly(2, 4, StructureTag::ParaSkewHermitian, 3, None);
        let (lin, _, _) = deflate_ls_structured(&p, StructureTag::ParaSkewHermitian, RankTolerance::default()).unwrap();
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0.adjoint(), -l0);
        assert_eq!(l1.adjoint(), l1);
        let bad = random_poly(2, 2, 2, 1, None);
        assert!(matches!(
            deflate_ls_structured(&bad, StructureTag::Hermitian, RankTolerance::default()),
            Err(Error::Structure { .. })
        ));
    }

    #[test]
    fn quadratic_low_rank() {
        let (lin_q, lin_d) = (
            quad_lowrank(&example_2_1(), RankTolerance::default()).unwrap(),
            deflate_ls(&example_2_1(), RankTolerance::default()).unwrap().0,
        );
        assert_eq!(lin_q.pencil_coeffs(), lin_d.pencil_coeffs());

        let p = random_poly(6, 6, 2, 12, Some(1));
        let lin = quad_lowrank(&p, RankTolerance::default()).unwrap();
        assert_eq!(lin.eval(ONE).shape(), (7, 7));
        assert_transfer_poly(&lin, &p, 1e-9);

        let p = random_poly(5, 3, 2, 13, None);
        let lin = quad_lowrank(&p, RankTolerance::default()).unwrap();
        assert_eq!(lin.eval(ONE).shape(), (8, 6));
        assert_transfer_poly(&lin, &p, 1e-9);
        assert!(quad_lowrank(&random_poly(2, 2, 3, 1, None), RankTolerance::default()).is_err());
    }

    #[test]
    fn quadratic_factored() {
        let one = eye(1);
        let lin = quad_lowrank_factored(&zeros(1, 1), &zeros(1, 1), &one, &one).unwrap();
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0, diag_real(&[-1.0, 0.0]));
        assert_eq!(l1, from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let mut rng = random::rng(66);
        let (p1, p0) = (random::matrix(&mut rng, 4, 3), random::matrix(&mut rng, 4, 3));
        let (lf, uf) = (random::matrix(&mut rng, 4, 2), random::matrix(&mut rng, 3, 2));
        let p = PolyMatrix::new(vec![p0.clone(), p1.clone(), &lf * uf.adjoint()]).unwrap();
        let lin = quad_lowrank_factored(&p1, &p0, &lf, &uf).unwrap();
        assert_transfer_poly(&lin, &p, 1e-10);
        let other = quad_lowrank(&p, RankTolerance::default()).unwrap();
        assert_transfer_poly(&other, &p, 1e-10);

        let col = lf.columns(0, 1).into_owned();
        let dup = hstack(&[&col, &col]);
        assert!(matches!(quad_lowrank_factored(&p1, &p0, &dup, &uf), Err(Error::Input(_))));
    }

    #[test]
    fn trivial_cases() {
        let lin = trivial_linearization(&PolyMatrix::new(vec![zeros(2, 2), eye(2)]).unwrap());
        assert_eq!((lin.state_dim(), lin.d1.clone(), lin.d0.clone()), (0, eye(2), zeros(2, 2)));
        let k = from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let lin = trivial_linearization(&PolyMatrix::new(vec![k.clone()]).unwrap());
        assert_eq!((lin.d0.clone(), lin.d1.clone()), (-&k, zeros(2, 2)));
        assert_eq!(lin.transfer(c(5.0, 1.0)).unwrap(), k);
    }

    #[test]
    fn realize_small_tails() {
        let (lin, _) = realize_strictly_proper(&scalar_tail(&[1.0, 0.0]), 1, RankTolerance::default()).unwrap();
        assert!(same_up_to_phases(&lin.eval(c(2.0, 0.0)), &from_real(2, 2, &[-2.0, 1.0, 1.0, 0.0])));
        assert!((lin.transfer(c(4.0, 0.0)).unwrap()[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);

        let (lin, comp) = realize_strictly_proper(&scalar_tail(&[1.0; 8]), 2, RankTolerance::default()).unwrap();
        assert_eq!(comp.rank, 1);
        assert!((comp.core[(0, 0)].norm() - 2.0).abs() < 1e-14);
        let s2 = 2f64.sqrt();
        assert!(same_up_to_phases(&lin.eval(ZERO), &from_real(2, 2, &[2.0, s2, s2, 0.0])));
        assert!(same_up_to_phases(&lin.eval(ONE), &from_real(2, 2, &[0.0, s2, s2, 0.0])));
        let z = c(3.0, 0.5);
        assert!((lin.transfer(z).unwrap()[(0, 0)] - (z - ONE).inv()).norm() < 1e-14);
        assert!(realize_strictly_proper(&scalar_tail(&[1.0; 4]), 3, RankTolerance::default()).is_err());
    }

    #[test]
    fn realize_state_space_tail() {
        let ss = random_state_space(4, 2, 3, 70);
        let (lin, comp) = realize_strictly_proper(&ss.laurent_tail(10).unwrap(), 5, RankTolerance::default()).unwrap();
        assert_eq!(comp.rank, 4);
        let direct = from_state_space(&ss);
        let mut rng = random::rng(71);
        for _ in 0..20 {
            let z = random::point(&mut rng, 1.5, 4.0);
            let want = ss.eval(z).unwrap();
            assert!(rel_err(&lin.transfer(z).unwrap(), &want) <= 1e-6);
            assert!(rel_err(&direct.transfer(z).unwrap(), &want) <= 1e-12);
        }
    }

    #[test]
    fn structured_realizations() {
        let (lin, _, _) = realize_strictly_proper_structured(&scalar_tail(&[1.0; 8]), StructureTag::Hermitian, 2, RankTolerance::default()).unwrap();
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0.adjoint(), l0);
        assert_eq!(l1.adjoint(), l1);
        assert!(l0.iter().chain(l1.iter()).all(|z| z.im.abs() < 1e-14));
        let z = c(0.4, 2.0);
        assert!((lin.transfer(z).unwrap()[(0, 0)] - (z - ONE).inv()).norm() < 1e-13);

        let tail = LaurentTail::new(vec![zeros(2, 2), eye(2), zeros(2, 2), zeros(2, 2)]).unwrap();
        let (lin, comp, _) = realize_strictly_proper_structured(&tail, StructureTag::ParaHermitian, 2, RankTolerance::default()).unwrap();
        assert_eq!(comp.rank, 4);
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0.adjoint(), l0);
        assert_eq!(l1.adjoint(), -l1);
        let z = c(0.5, 1.5);
        assert!(rel_err(&lin.transfer(z).unwrap(), &(eye(2) * (z * z).inv())) < 1e-13);

        let (lin, comp, _) = realize_strictly_proper_structured(&LaurentTail::zero(2, 2, 4).unwrap(), StructureTag::Hermitian, 2, RankTolerance::default()).unwrap();
        assert_eq!((comp.rank, lin.state_dim()), (0, 0));

        for tag in StructureTag::STRUCTURED {
            let tail = random_structured_tail(2, 6, tag, 5, None).unwrap();
            let (lin, _, defect) = realize_strictly_proper_structured(&tail, tag, 3, RankTolerance::default()).unwrap();
            assert!(defect <= 1e-12 * tail.scale(), "{tag}");
            assert_eq!(pencil_structure_defect(&lin, tag), 0.0);
        }
    }

    #[test]
    fn state_space_pencil() {
        let one = eye(1);
        let ss = StateSpaceTriple::new(one.clone(), one.clone(), one.clone(), one).unwrap();
        let lin = from_state_space(&ss);
        let z = c(3.0, 0.0);
        assert!((lin.transfer(z).unwrap()[(0, 0)] - (ONE - z).inv()).norm() < 1e-15);
    }

    #[test]
    fn combine_cases() {
        let lpoly = deflate_ls(&scalar_poly(&[0.0, 0.0, 1.0]), RankTolerance::default()).unwrap().0;
        let (lsp, _) = realize_strictly_proper(&scalar_tail(&[1.0, 0.0]), 1, RankTolerance::default()).unwrap();
        let lin = combine(&lpoly, &lsp).unwrap();
        assert_eq!(lin.eval(ONE).shape(), (3, 3));
        let mut rng = random::rng(2);
        for _ in 0..10 {
            let z = random::point(&mut rng, 0.5, 2.0);
            assert!((lin.transfer(z).unwrap()[(0, 0)] - (z * z + z.inv())).norm() < 1e-12 * (z * z).norm());
        }
        let empty = realize_strictly_proper(&scalar_tail(&[0.0, 0.0]), 1, RankTolerance::default()).unwrap().0;
        assert_eq!(combine(&lpoly, &empty).unwrap(), lpoly);
        let wide = trivial_linearization(&PolyMatrix::new(vec![zeros(1, 2)]).unwrap());
        assert!(matches!(combine(&wide, &lsp), Err(Error::Shape(_))));
    }

    #[test]
    fn rational_dispatch() {
        let p = random_poly(3, 3, 3, 4, Some(2));
        let (lin, rep) = linearize_rational(&RationalMatrix::polynomial(p.clone()), StructureTag::None, RankTolerance::default()).unwrap();
        assert_eq!(lin, deflate_ls(&p, RankTolerance::default()).unwrap().0);
        assert_eq!(rep.poly_route, "deflated");

        let tail = scalar_tail(&[1.0; 8]);
        let r = RationalMatrix::new(PolyMatrix::zero(1, 1), Some(StrictlyProper::Tail(tail.clone()))).unwrap();
        let (lin, rep) = linearize_rational(&r, StructureTag::None, RankTolerance::default()).unwrap();
        assert_eq!(lin.state_dim(), 1);
        assert_eq!(rep.k_choice.unwrap().rank, 1);

        let r = RationalMatrix::new(
            scalar_poly(&[0.0, 0.0, 1.0]),
            Some(StrictlyProper::Tail(scalar_tail(&[0.0, 1.0, 0.0, 0.0]))),
        )
        .unwrap();
        let (lin, rep) = linearize_rational(&r, StructureTag::ParaHermitian, RankTolerance::default()).unwrap();
        let (l0, l1) = lin.pencil_coeffs();
        assert_eq!(l0.adjoint(), l0);
        assert_eq!(l1.adjoint(), -l1);
        assert!(rep.certificate.unwrap().strongly_minimal());
        let z = c(1.3, 0.4);
        assert!((lin.transfer(z).unwrap()[(0, 0)] - (z * z + (z * z).inv())).norm() < 1e-11);
    }
}
