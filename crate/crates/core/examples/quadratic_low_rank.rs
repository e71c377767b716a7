//! Quadratics whose leading coefficient has low rank `r₂` get an
//! `(r₂ + m) × (r₂ + n)` linearization instead of a `2m × 2n` one.

use strongmin::analyze::{check_strong_minimality, relative_error, MinimalityOptions};
use strongmin::linearize::{quad_lowrank, quad_lowrank_factored};
use strongmin::numkernel::{random, RankTolerance};
use strongmin::polyrat::{random_poly, PolyMatrix};

pub fn run_example() -> strongmin::Result<()> {
    let (m, n, r2) = (5, 4, 2);
    let p = random_poly(m, n, 2, 7, Some(r2));
    let lin = quad_lowrank(&p, RankTolerance::default())?;
    let (l0, _) = lin.pencil_coeffs();
    println!("{m}x{n} quadratic with rank-{r2} leading coefficient -> {}x{} pencil", l0.nrows(), l0.ncols());
    assert_eq!(l0.shape(), (r2 + m, r2 + n));

    let cert = check_strong_minimality(&lin, &MinimalityOptions::default())?;
    assert!(cert.strongly_minimal());

    // Any full-rank factorization P₂ = L·U* works, orthonormal or not.
    let mut rng = random::rng(8);
    let (lfac, ufac) = (random::matrix(&mut rng, m, r2), random::matrix(&mut rng, n, r2));
    let q = PolyMatrix::new(vec![p.coeff(0), p.coeff(1), &lfac * ufac.adjoint()])?;
    let fact = quad_lowrank_factored(&q.coeff(1), &q.coeff(0), &lfac, &ufac)?;
    let z = random::point(&mut rng, 0.5, 2.0);
    let err = relative_error(&fact.transfer(z)?, &q.eval(z));
    println!("factored variant, transfer error at a random point: {err:.2e}");
    assert!(err < 1e-10);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("quadratic example failed");
}
