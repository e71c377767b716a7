#[path = "../examples/deflate_polynomial.rs"]
mod deflate_polynomial;

#[path = "../examples/quadratic_low_rank.rs"]
mod quadratic_low_rank;

#[path = "../examples/structured_polynomial.rs"]
mod structured_polynomial;

#[path = "../examples/strictly_proper.rs"]
mod strictly_proper;

#[path = "../examples/rational_combination.rs"]
mod rational_combination;

#[path = "../examples/infinity_structure.rs"]
mod infinity_structure;

#[path = "../examples/eigenvector_recovery.rs"]
mod eigenvector_recovery;

#[path = "../examples/problem_files.rs"]
mod problem_files;


#[test]
fn deflate_polynomial_runs() {
    deflate_polynomial::run_example().expect("deflate_polynomial example should run");
}

#[test]
fn quadratic_low_rank_runs() {
    quadratic_low_rank::run_example().expect("quadratic_low_rank example should run");
}

#[test]
fn structured_polynomial_runs() {
    structured_polynomial::run_example().expect("structured_polynomial example should run");
}

#[test]
fn strictly_proper_runs() {
    strictly_proper::run_example().expect("strictly_proper example should run");
}

#[test]
fn rational_combination_runs() {
    rational_combination::run_example().expect("rational_combination example should run");
}

#[test]
fn infinity_structure_runs() {
    infinity_structure::run_example().expect("infinity_structure example should run");
}

#[test]
fn eigenvector_recovery_runs() {
    eigenvector_recovery::run_example().expect("eigenvector_recovery example should run");
}

#[test]
fn problem_files_runs() {
    problem_files::run_example().expect("problem_files example should run");
}
