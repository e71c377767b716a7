//! Eigenvectors of `P` at a finite eigenvalue are the trailing block of
//! null vectors of the linearization, and can be lifted back.

use strongmin::analyze::{lift_eigenvector, recover_eigenvector, Side};
use strongmin::linearize::deflate_ls;
use strongmin::numkernel::{c, diag_real, svd, CMatrix, CVector, RankTolerance};
use strongmin::polyrat::PolyMatrix;

pub fn run_example() -> strongmin::Result<()> {
    let p = PolyMatrix::new(vec![CMatrix::identity(2, 2), CMatrix::identity(2, 2), diag_real(&[0.0, 1.0])])?;
    let (lin, _) = deflate_ls(&p, RankTolerance::default())?;
    let lambda = c(-1.0, 0.0);

    let dec = svd(&lin.eval(lambda))?;
    let last = dec.v.ncols() - 1;
    println!("smallest singular value of L(-1): {:.1e}", dec.s[last]);
    let v = CVector::from_column_slice(dec.v.column(last).as_slice());

    let x = recover_eigenvector(&lin, lambda, Side::Right, &v)?;
    let residual = (p.eval(lambda) * &x).norm() / x.norm();
    let shown: Vec<String> = x.iter().map(|z| format!("{:.4}{:+.4}i", z.re, z.im)).collect();
    println!("eigenvector [{}], residual {residual:.1e}", shown.join(", "));
    assert!(residual < 1e-12);

    let back = lift_eigenvector(&lin, lambda, Side::Right, &x)?;
    assert!((lin.eval(lambda) * back).norm() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("eigenvector example failed");
}
