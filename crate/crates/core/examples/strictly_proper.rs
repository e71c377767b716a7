//! Realizing a strictly proper part from its Laurent expansion at infinity.
//! The McMillan degree is read off the rank of a block Hankel matrix.

use strongmin::analyze::relative_error;
use strongmin::hankel::choose_k;
use strongmin::linearize::realize_strictly_proper;
use strongmin::numkernel::{random, RankTolerance};
use strongmin::polyrat::random_state_space;

pub fn run_example() -> strongmin::Result<()> {
    let q = 3;
    let ss = random_state_space(q, 2, 2, 11);
    let tail = ss.laurent_tail(12)?;

    let tol = RankTolerance::default();
    let k = choose_k(&tail, tol)?;
    println!("k = {} (stabilized: {}), Hankel rank {}", k.k_used, k.stabilized, k.rank);

    let (lin, comp) = realize_strictly_proper(&tail, k.k_used, tol)?;
    println!("recovered McMillan degree {} (true {q})", comp.rank);
    assert_eq!(lin.state_dim(), q);

    let mut rng = random::rng(12);
    let worst = (0..20)
        .map(|_| {
            let z = random::point(&mut rng, 1.0, 3.0);
            Ok(relative_error(&lin.transfer(z)?, &ss.eval(z)?))
        })
        .collect::<strongmin::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("worst resolvent mismatch over 20 points: {worst:.2e}");
    assert!(worst < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("realization example failed");
}
