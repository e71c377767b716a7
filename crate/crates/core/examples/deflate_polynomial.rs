//! Deflated linearization of `P(λ) = λ²·diag(0, 1) + λI + I`.
//!
//! The leading coefficient has rank one, so the companion-type pencil
//! shrinks to a single state and the result is a 3×3 pencil.

use strongmin::analyze::{check_strong_minimality, pencil_finite_eigenvalues, relative_error, MinimalityOptions};
use strongmin::linearize::deflate_ls;
use strongmin::numkernel::{c, diag_real, CMatrix, RankTolerance};
use strongmin::polyrat::PolyMatrix;

pub fn run_example() -> strongmin::Result<()> {
    let p = PolyMatrix::new(vec![CMatrix::identity(2, 2), CMatrix::identity(2, 2), diag_real(&[0.0, 1.0])])?;
    let (lin, comp) = deflate_ls(&p, RankTolerance::default())?;
    println!("rank of the leading Hankel block: {}", comp.rank);
    println!("state dimension: {}", lin.state_dim());

    let z = c(0.3, -1.2);
    let err = relative_error(&lin.transfer(z)?, &p.eval(z));
    println!("transfer error at {z}: {err:.2e}");
    assert!(err < 1e-12);

    let cert = check_strong_minimality(&lin, &MinimalityOptions::default())?;
    println!("strongly minimal: {} (margin {:.1e})", cert.strongly_minimal(), cert.min_margin());
    assert!(cert.strongly_minimal());

    let (l0, l1) = lin.pencil_coeffs();
    for (lambda, mult) in pencil_finite_eigenvalues(&l0, &l1)? {
        println!("eigenvalue {:+.6} {:+.6}i  multiplicity {mult}", lambda.re, lambda.im);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("deflation example failed");
}
