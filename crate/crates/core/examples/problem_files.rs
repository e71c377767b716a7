//! Problem and result files: the JSON the command-line tool reads and
//! writes, driven here in memory.

use strongmin::cli::{analyze_result, linearize_problem, sha256_hex, verify, AnalyzeFlags, LinearizeFlags, ProblemFile, ResultFile};

const PROBLEM: &str = r#"{
  "kind": "rational",
  "rows": 1,
  "cols": 1,
  "poly_coeffs": [[[0]], [[0]], [[1]]],
  "laurent_tail": [[[0]], [[1]], [[0]], [[0]], [[0]], [[0]]],
  "structure": "para_hermitian"
}"#;

pub fn run_example() -> strongmin::Result<()> {
    let problem = ProblemFile::parse(PROBLEM)?;
    let result = linearize_problem(&problem, &sha256_hex(PROBLEM.as_bytes()), &LinearizeFlags::default())?;
    let text = result.to_json();
    println!("{}", &text[..text.find("\"blocks\"").unwrap_or(text.len())]);

    let reread = ResultFile::parse(&text)?;
    assert_eq!(reread.system()?, result.system()?);

    let report = verify(&reread, &problem, PROBLEM.as_bytes())?;
    println!("verify: passed {} via {} (residual {:.1e})", report.passed, report.method, report.residual);
    assert!(report.passed && report.digest_matches);

    let analysis = analyze_result(&reread, &AnalyzeFlags::default())?;
    println!("indices at infinity {:?}", analysis.indices_at_infinity);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("problem file example failed");
}
