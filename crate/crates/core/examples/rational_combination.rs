//! `R(λ) = λ² + 1/λ`: the polynomial and strictly proper parts are
//! linearized separately and stacked into one pencil of state dimension 2.

use strongmin::linearize::linearize_rational;
use strongmin::numkernel::{c, from_real, RankTolerance};
use strongmin::polyrat::{LaurentTail, PolyMatrix, RationalMatrix, StrictlyProper, StructureTag};

pub fn run_example() -> strongmin::Result<()> {
    let scalar = |v: f64| from_real(1, 1, &[v]);
    let poly = PolyMatrix::new(vec![scalar(0.0), scalar(0.0), scalar(1.0)])?;
    let tail = LaurentTail::new(vec![scalar(1.0), scalar(0.0), scalar(0.0), scalar(0.0)])?;
    let r = RationalMatrix::new(poly, Some(StrictlyProper::Tail(tail)))?;

    let (lin, report) = linearize_rational(&r, StructureTag::None, RankTolerance::default())?;
    println!("routes: {:?}", report.routes());
    println!("state dimension: {}", lin.state_dim());
    assert_eq!(lin.state_dim(), 2);

    let z = c(2.0, 1.0);
    let got = lin.transfer(z)?[(0, 0)];
    let want = z * z + 1.0 / z;
    println!("R({z}) = {want}, pencil gives {got}");
    assert!((got - want).norm() < 1e-12);
    assert!(report.certificate.is_some_and(|cert| cert.strongly_minimal()));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("combination example failed");
}
