//! Structure-preserving deflation of a para-Hermitian quadratic:
//! `P(λ) = λ²·diag(1, 0) + diag(0, −1)`.

use strongmin::analyze::{pencil_finite_eigenvalues, quad_infinity};
use strongmin::linearize::deflate_ls_structured;
use strongmin::numkernel::{diag_real, CMatrix, RankTolerance};
use strongmin::polyrat::{check_structure_poly, PolyMatrix, StructureTag};

pub fn run_example() -> strongmin::Result<()> {
    let tag = StructureTag::ParaHermitian;
    let p = PolyMatrix::new(vec![diag_real(&[0.0, -1.0]), CMatrix::zeros(2, 2), diag_real(&[1.0, 0.0])])?;
    println!("input structure defect: {:.1e}", check_structure_poly(&p, tag)?.defect);

    let tol = RankTolerance::default();
    let (lin, _, defect) = deflate_ls_structured(&p, tag, tol)?;
    let (l0, l1) = lin.pencil_coeffs();
    println!("pencil structure defect: {defect:.1e}");
    println!("L0 = {l0}L1 = {l1}");
    assert!(defect <= 1e-13);

    for (lambda, mult) in pencil_finite_eigenvalues(&l0, &l1)? {
        println!("finite eigenvalue {lambda} with multiplicity {mult}");
    }
    let inf = quad_infinity(&p, &lin, 2, 1, tol)?;
    println!("partial multiplicities at infinity: {:?}", inf.indices);
    assert_eq!(inf.indices, vec![2]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("structured example failed");
}
