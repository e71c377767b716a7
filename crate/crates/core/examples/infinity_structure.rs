//! Structural indices at infinity read off a strongly minimal pencil, and
//! the same data seen as partial multiplicities of the reversal `rev_d P`.

use strongmin::analyze::{degree_audit, eig_structure_at_infinity_poly, indices_at_infinity, partial_mults_at_zero};
use strongmin::linearize::deflate_ls;
use strongmin::numkernel::RankTolerance;
use strongmin::polyrat::random_poly;

pub fn run_example() -> strongmin::Result<()> {
    let tol = RankTolerance::default();
    let p = random_poly(3, 3, 3, 5, Some(1));
    let (lin, _) = deflate_ls(&p, tol)?;

    let ix = indices_at_infinity(&lin, 3, tol)?;
    println!("indices at infinity: {:?}", ix.indices);

    let via_pencil = eig_structure_at_infinity_poly(&p, &lin, tol)?;
    let mut direct = partial_mults_at_zero(&p.reversal(p.degree())?, tol)?.indices;
    direct.retain(|&t| t > 0);
    println!("rev_d P multiplicities: {:?} from the pencil, {:?} directly", via_pencil.indices, direct);
    assert_eq!(via_pencil.indices, direct);

    let audit = degree_audit(&lin, Some(&p), tol)?;
    println!("rank L1 = {}, polar degree = {:?}", audit.rank_l1, audit.polar_degree);
    assert_eq!(audit.consistent, Some(true));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("infinity example failed");
}
