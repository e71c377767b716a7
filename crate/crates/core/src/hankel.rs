//! Block Hankel builders, scaling matrices and the rank compressions used by
//! every linearization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, c, hermitian_eigendecomp, CMatrix, RankTolerance, J};
use crate::polyrat::{LaurentTail, PolyMatrix, StructureTag};

/// Values within this factor of the rank threshold are flagged as borderline.
pub const BORDERLINE_FACTOR: f64 = 10.0;

/// Tolerance on `‖M̃ − M̃*‖_F / ‖M̃‖_F` for the Hermitian representative.
pub const HERMITIAN_RELATIVE: f64 = 1e-12;

/// Constant `(d−1)m × (d−1)n` block Hankel matrix whose `(i, j)` block is
/// `P_{2d−2−i−j}` on and below the antidiagonal and zero above it.
pub fn build_t(p: &PolyMatrix) -> Result<CMatrix> {
    let d = p.degree();
    if d < 2 {
        return Err(Error::Degenerate(format!("T needs degree at least 2, got {d}")));
    }
    let (m, n) = (p.rows(), p.cols());
    let nb = d - 1;
    let mut t = CMatrix::zeros(nb * m, nb * n);
    for i in 0..nb {
        for j in 0..nb {
            if i + j + 2 >= d {
                t.view_mut((i * m, j * n), (m, n)).copy_from(&p.coeffs()[2 * d - 2 - i - j]);
            }
        }
    }
    Ok(t)
}

/// `H` over `R₋₁ … R₋₂ₖ₊₁` and the shifted `H_σ` over `R₋₂ … R₋₂ₖ`, using the
/// leading `2k` blocks of the tail.
pub fn build_h_pair_k(tail: &LaurentTail, k: usize) -> Result<(CMatrix, CMatrix)> {
    if k == 0 {
        return Err(Error::Input("Hankel order k must be at least 1".into()));
    }
    if tail.depth() < 2 * k {
        return Err(Error::Input(format!(
            "Hankel order {k} needs {} tail blocks, only {} given",
            2 * k,
            tail.depth()
        )));
    }
    let (m, n) = (tail.rows(), tail.cols());
    let mut h = CMatrix::zeros(k * m, k * n);
    let mut hs = CMatrix::zeros(k * m, k * n);
    for i in 0..k {
        for j in 0..k {
            h.view_mut((i * m, j * n), (m, n)).copy_from(tail.block(i + j + 1));
            hs.view_mut((i * m, j * n), (m, n)).copy_from(tail.block(i + j + 2));
        }
    }
    Ok((h, hs))
}

/// `build_h_pair_k` with `k` = half the tail depth.
pub fn build_h_pair(tail: &LaurentTail) -> Result<(CMatrix, CMatrix)> {
    build_h_pair_k(tail, tail.depth() / 2)
}

/// Which Hankel family a scaling matrix belongs to. It fixes the sign
/// pattern and which product is Hermitian for the para structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HankelFamily {
    Polynomial,
    Laurent,
}

/// Block diagonal `diag(±I_m, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingS {
    pub family: HankelFamily,
    pub block_size: usize,
    pub signs: Vec<f64>,
}

impl ScalingS {
    pub fn blocks(&self) -> usize {
        self.signs.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks() * self.block_size
    }

    pub fn matrix(&self) -> CMatrix {
        let m = self.block_size;
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                c(self.signs[i / m], 0.0)
            } else {
                numkernel::ZERO
            }
        })
    }

    /// `S·X` by flipping block rows.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        assert_eq!(x.nrows(), self.dim(), "scaling applied to mismatched rows");
        let mut out = x.clone();
        for (b, s) in self.signs.iter().enumerate() {
            if *s < 0.0 {
                out.rows_mut(b * self.block_size, self.block_size).neg_mut();
            }
        }
        out
    }
}

/// `diag((−1)^{d−1} I_m, …, I_m, −I_m)` with `d−1` blocks.
pub fn build_s_poly(d: usize, m: usize) -> ScalingS {
    assert!(d >= 2, "polynomial scaling needs d >= 2");
    let signs = (0..d - 1)
        .map(|i| if (d - 1 - i).is_multiple_of(2) { 1.0 } else { -1.0 })
        .collect();
    ScalingS {
        family: HankelFamily::Polynomial,
        block_size: m,
        signs,
    }
}

/// `diag(−I_m, I_m, −I_m, …)` with `k` blocks.
pub fn build_s_rat(k: usize, m: usize) -> ScalingS {
    assert!(k >= 1, "Laurent scaling needs k >= 1");
    let signs = (0..k).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
    ScalingS {
        family: HankelFamily::Laurent,
        block_size: m,
        signs,
    }
}

/// Where the zero block of `U*MV` sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `[[0, 0], [0, core]]`
    ZerosFirst,
    /// `[[core, 0], [0, 0]]`
    CoreFirst,
}

#[derive(Clone, Debug)]
pub struct CompressionResult {
    pub u: CMatrix,
    pub v: CMatrix,
    pub rank: usize,
    pub core: CMatrix,
    pub layout: Layout,
    /// Singular values (unstructured) or eigenvalue moduli (structured),
    /// descending.
    pub spectrum: Vec<f64>,
    pub threshold: f64,
    /// Some value of `spectrum` lies within a factor 10 of `threshold`.
    pub borderline: bool,
}

impl CompressionResult {
    fn core_cols(&self, rows: usize) -> std::ops::Range<usize> {
        match self.layout {
            Layout::ZerosFirst => rows - self.rank..rows,
            Layout::CoreFirst => 0..self.rank,
        }
    }

    /// Columns of `U` spanning the core (`U₂` or `U₁`).
    pub fn u_sel(&self) -> CMatrix {
        let r = self.core_cols(self.u.ncols());
        self.u.columns(r.start, r.len()).into_owned()
    }

    /// Columns of `V` spanning the core.
    pub fn v_sel(&self) -> CMatrix {
        let r = self.core_cols(self.v.ncols());
        self.v.columns(r.start, r.len()).into_owned()
    }

    /// `U*MV` with the core placed according to the layout and zeros elsewhere.
    pub fn block_form(&self) -> CMatrix {
        let (rows, cols) = (self.u.ncols(), self.v.ncols());
        let mut out = CMatrix::zeros(rows, cols);
        let (r0, c0) = match self.layout {
            Layout::ZerosFirst => (rows - self.rank, cols - self.rank),
            Layout::CoreFirst => (0, 0),
        };
        out.view_mut((r0, c0), (self.rank, self.rank)).copy_from(&self.core);
        out
    }

    /// `‖U*MV − block_form‖₂`.
    pub fn off_core_residual(&self, m: &CMatrix) -> f64 {
        numkernel::norm2(&(self.u.adjoint() * m * &self.v - self.block_form()))
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.borderline {
            vec![format!(
                "rank decision is borderline: a value lies within a factor {BORDERLINE_FACTOR} of the threshold {:.3e}",
                self.threshold
            )]
        } else {
            Vec::new()
        }
    }
}

fn is_borderline(values: &[f64], threshold: f64) -> bool {
    threshold > 0.0
        && values
            .iter()
            .any(|&s| s > threshold / BORDERLINE_FACTOR && s < threshold * BORDERLINE_FACTOR)
}

/// Order `0..len` so that `keep` indices come in their given order at the
/// position the layout prescribes.
fn arrange(keep: &[usize], drop: &[usize], layout: Layout) -> Vec<usize> {
    match layout {
        Layout::ZerosFirst => drop.iter().chain(keep).copied().collect(),
        Layout::CoreFirst => keep.iter().chain(drop).copied().collect(),
    }
}

fn permute_columns(m: &CMatrix, order: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

/// Two-sided unitary compression via the SVD.
pub fn compress_unstructured(m: &CMatrix, layout: Layout, tol: RankTolerance) -> Result<CompressionResult> {
    tol.validate()?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(CompressionResult {
            u: CMatrix::identity(rows, rows),
            v: CMatrix::identity(cols, cols),
            rank: 0,
            core: CMatrix::zeros(0, 0),
            layout,
            spectrum: Vec::new(),
            threshold: 0.0,
            borderline: false,
        });
    }
    let svd = numkernel::svd(m)?;
    let threshold = tol.threshold(svd.s.first().copied().unwrap_or(0.0), rows, cols);
    let rank = svd.s.iter().filter(|&&s| s > threshold).count();
    let keep: Vec<usize> = (0..rank).collect();
    let order_u = arrange(&keep, &(rank..rows).collect::<Vec<_>>(), layout);
    let order_v = arrange(&keep, &(rank..cols).collect::<Vec<_>>(), layout);
    let u = permute_columns(&svd.u, &order_u);
    let v = permute_columns(&svd.v, &order_v);
    let core = numkernel::diag_real(&svd.s[..rank]);
    Ok(CompressionResult {
        u,
        v,
        rank,
        core,
        layout,
        borderline: is_borderline(&svd.s, threshold),
        spectrum: svd.s,
        threshold,
    })
}

/// The Hermitian matrix whose eigenvectors give `V`, for structured `M`.
///
/// | tag | polynomial `T` | Laurent `H` |
/// |---|---|---|
/// | hermitian | `M` | `M` |
/// | skew_hermitian | `jM` | `jM` |
/// | para_hermitian | `SM` | `jSM` |
/// | para_skew_hermitian | `jSM` | `SM` |
pub fn hermitian_representative(m: &CMatrix, tag: StructureTag, s: Option<&ScalingS>) -> Result<CMatrix> {
    let needs_s = || {
        s.ok_or_else(|| Error::Input(format!("{tag} compression needs a scaling matrix")))
    };
    let rep = match tag {
        StructureTag::None => return Err(Error::Input("structured compression needs a structure tag".into())),
        StructureTag::Hermitian => m.clone(),
        StructureTag::SkewHermitian => m * J,
        StructureTag::ParaHermitian | StructureTag::ParaSkewHermitian => {
            let s = needs_s()?;
            if s.dim() != m.nrows() {
                return Err(Error::Shape(format!(
                    "scaling matrix has dimension {}, matrix has {} rows",
                    s.dim(),
                    m.nrows()
                )));
            }
            let sm = s.apply(m);
            let times_j = match (s.family, tag) {
                (HankelFamily::Polynomial, StructureTag::ParaHermitian) => false,
                (HankelFamily::Polynomial, _) => true,
                (HankelFamily::Laurent, StructureTag::ParaHermitian) => true,
                (HankelFamily::Laurent, _) => false,
            };
            if times_j {
                sm * J
            } else {
                sm
            }
        }
    };
    Ok(rep)
}

/// Compression with `V` from an eigendecomposition of the Hermitian
/// representative and `U = V` or `U = SV`, so the core inherits the structure.
pub fn compress_structured(
    m: &CMatrix,
    tag: StructureTag,
    s: Option<&ScalingS>,
    layout: Layout,
    tol: RankTolerance,
) -> Result<CompressionResult> {
    tol.validate()?;
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "structured compression needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let rep = hermitian_representative(m, tag, s)?;
    if n == 0 {
        return compress_unstructured(m, layout, tol);
    }
    let asym = (&rep - rep.adjoint()).norm();
    let scale = rep.norm();
    if asym > HERMITIAN_RELATIVE * scale {
        return Err(Error::Structure {
            what: format!("{tag} representative of the Hankel matrix is not Hermitian"),
            defect: asym,
        });
    }
    let (q, eig) = hermitian_eigendecomp(&rep)?;
    let mut by_modulus: Vec<usize> = (0..n).collect();
    by_modulus.sort_by(|&a, &b| eig[b].abs().total_cmp(&eig[a].abs()));
    let moduli: Vec<f64> = by_modulus.iter().map(|&i| eig[i].abs()).collect();
    let threshold = tol.threshold(moduli[0], n, n);
    let rank = moduli.iter().filter(|&&x| x > threshold).count();
    let order = arrange(&by_modulus[..rank], &by_modulus[rank..], layout);
    let v = permute_columns(&q, &order);
    let u = match tag {
        StructureTag::ParaHermitian | StructureTag::ParaSkewHermitian => {
            s.expect("checked by hermitian_representative").apply(&v)
        }
        _ => v.clone(),
    };
    let mut out = CompressionResult {
        u,
        v,
        rank,
        core: CMatrix::zeros(0, 0),
        layout,
        borderline: is_borderline(&moduli, threshold),
        spectrum: moduli,
        threshold,
    };
    out.core = out.u_sel().adjoint() * m * out.v_sel();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KChoice {
    pub k_used: usize,
    pub stabilized: bool,
    /// Rank of `H` at `k_used`.
    pub rank: usize,
}

/// Picks the Hankel order for a tail: the largest `k` whose rank equals the
/// rank at `k−1`. `stabilized` is false when the rank still grows at the
/// deepest order the data allows.
pub fn choose_k(tail: &LaurentTail, tol: RankTolerance) -> Result<KChoice> {
    if tail.depth() < 4 {
        return Err(Error::Input(format!(
            "choosing k needs at least 4 tail blocks, got {}",
            tail.depth()
        )));
    }
    let kmax = tail.depth() / 2;
    let mut ranks = vec![0usize];
    for k in 1..=kmax {
        let (h, _) = build_h_pair_k(tail, k)?;
        ranks.push(numkernel::rank_of(&h, tol));
    }
    let k_used = (2..=kmax).rev().find(|&k| ranks[k - 1] == ranks[k]).unwrap_or(kmax);
    Ok(KChoice {
        k_used,
        stabilized: ranks[kmax - 1] == ranks[kmax],
        rank: ranks[k_used],
    })
}
