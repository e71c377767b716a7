//! File formats and the three commands behind the `strongmin` binary.
//!
//! Complex numbers are written as `[re, im]` pairs with 17 significant
//! digits so that a result file reassembles to the exact pencil it was
//! certified for. Problem files may also give purely real entries as bare
//! numbers.

use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};

use crate::analyze::{
    self, check_strong_minimality, infinity_to_reversal, pencil_finite_eigenvalues, MinimalityCertificate,
    MinimalityOptions,
};
use crate::error::{Error, Result};
use crate::hankel::CompressionResult;
use crate::linearize::{linearize_rational_with, LinearSystemMatrix, LinearizeOptions, RouteSummary};
use crate::numkernel::{c, random, CMatrix, RankTolerance};
use crate::polyrat::{LaurentTail, PolyMatrix, RationalMatrix, StateSpaceTriple, StrictlyProper, StructureTag};

pub const TOOL: &str = concat!("strongmin ", env!("CARGO_PKG_VERSION"));

/// Exit statuses of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const STRUCTURE: i32 = 2;
    pub const STRICT: i32 = 3;
    pub const VERIFY: i32 = 4;
    pub const UNSUPPORTED: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Structure { .. } => exit::STRUCTURE,
        Error::SingularPencil => exit::UNSUPPORTED,
        Error::Precondition(_) => exit::VERIFY,
        _ => exit::INPUT,
    }
}

/// One complex entry. Reads `[re, im]` or a bare real number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry(pub Complex64);

impl Serialize for Entry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair([f64; 2]),
            Real(f64),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => Entry(c(re, im)),
            Repr::Real(re) => Entry(c(re, 0.0)),
        })
    }
}

/// Row-major nested rows.
pub type JsonMatrix = Vec<Vec<Entry>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry(m[(i, j)])).collect())
        .collect()
}

/// Reads a matrix that must have the given shape; `what` names it in errors.
pub fn matrix_from_json(rows: &JsonMatrix, shape: (usize, usize), what: &str) -> Result<CMatrix> {
    if rows.len() != shape.0 {
        return Err(Error::Input(format!("{what}: expected {} rows, found {}", shape.0, rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != shape.1 {
            return Err(Error::Input(format!(
                "{what}: row {i} has {} entries, expected {}",
                r.len(),
                shape.1
            )));
        }
    }
    let m = CMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j].0);
    numkernel_finite(&m, what)?;
    Ok(m)
}

fn numkernel_finite(m: &CMatrix, what: &str) -> Result<()> {
    crate::numkernel::ensure_finite(m).map_err(|_| Error::Input(format!("{what}: non-finite entry")))
}

/// Column count of a nested-rows matrix, if it has any rows.
fn json_cols(m: &JsonMatrix) -> Option<usize> {
    m.first().map(Vec::len)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Polynomial,
    Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOptions {
    /// Absolute rank threshold; relative machine-precision default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemOptions {
    fn is_empty(&self) -> bool {
        self == &ProblemOptions::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceJson {
    #[serde(rename = "A")]
    pub a: JsonMatrix,
    #[serde(rename = "E")]
    pub e: JsonMatrix,
    #[serde(rename = "B")]
    pub b: JsonMatrix,
    #[serde(rename = "C")]
    pub c: JsonMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub structure: StructureTag,
    /// `P₀, P₁, …` in ascending powers.
    #[serde(default)]
    pub poly_coeffs: Vec<JsonMatrix>,
    /// `R₋₁, R₋₂, …`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laurent_tail: Option<Vec<JsonMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_space: Option<StateSpaceJson>,
    #[serde(default, skip_serializing_if = "ProblemOptions::is_empty")]
    pub options: ProblemOptions,
}

impl ProblemFile {
    pub fn polynomial(p: &PolyMatrix, structure: StructureTag) -> Self {
        ProblemFile {
            kind: ProblemKind::Polynomial,
            rows: p.rows(),
            cols: p.cols(),
            structure,
            poly_coeffs: p.coeffs().iter().map(matrix_to_json).collect(),
            laurent_tail: None,
            state_space: None,
            options: ProblemOptions::default(),
        }
    }

    pub fn rational(r: &RationalMatrix, structure: StructureTag) -> Self {
        let mut f = Self::polynomial(&r.poly, structure);
        f.kind = ProblemKind::Rational;
        match &r.proper {
            Some(StrictlyProper::Tail(t)) => f.laurent_tail = Some(t.blocks().iter().map(matrix_to_json).collect()),
            Some(StrictlyProper::StateSpace(ss)) => {
                f.state_space = Some(StateSpaceJson {
                    a: matrix_to_json(&ss.a),
                    e: matrix_to_json(&ss.e),
                    b: matrix_to_json(&ss.b),
                    c: matrix_to_json(&ss.c),
                })
            }
            None => {}
        }
        f
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("problem file: {e}")))
    }

    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    /// Validates shapes and builds the rational matrix the file describes.
    pub fn to_rational(&self) -> Result<RationalMatrix> {
        let (m, n) = (self.rows, self.cols);
        if m == 0 || n == 0 {
            return Err(Error::Input("rows and cols must be positive".into()));
        }
        let coeffs = self
            .poly_coeffs
            .iter()
            .enumerate()
            .map(|(i, x)| matrix_from_json(x, (m, n), &format!("poly_coeffs[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let poly = if coeffs.is_empty() {
            PolyMatrix::zero(m, n)
        } else {
            PolyMatrix::with_shape(m, n, coeffs)?
        };
        let proper = match (self.kind, &self.laurent_tail, &self.state_space) {
            (ProblemKind::Polynomial, None, None) => None,
            (ProblemKind::Polynomial, _, _) => {
                return Err(Error::Input(
                    "a polynomial problem cannot carry laurent_tail or state_space".into(),
                ))
            }
            (ProblemKind::Rational, Some(_), Some(_)) => {
                return Err(Error::Input("give either laurent_tail or state_space, not both".into()))
            }
            (ProblemKind::Rational, Some(tail), None) => {
                let blocks = tail
                    .iter()
                    .enumerate()
                    .map(|(i, x)| matrix_from_json(x, (m, n), &format!("laurent_tail[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Some(StrictlyProper::Tail(LaurentTail::new(blocks)?))
            }
            (ProblemKind::Rational, None, Some(ss)) => {
                let q = ss.a.len();
                let ss = StateSpaceTriple::new(
                    matrix_from_json(&ss.a, (q, q), "state_space.A")?,
                    matrix_from_json(&ss.e, (q, q), "state_space.E")?,
                    matrix_from_json(&ss.b, (q, json_cols(&ss.b).unwrap_or(n)), "state_space.B")?,
                    matrix_from_json(&ss.c, (m, json_cols(&ss.c).unwrap_or(q)), "state_space.C")?,
                )?;
                Some(StrictlyProper::StateSpace(ss))
            }
            (ProblemKind::Rational, None, None) => None,
        };
        RationalMatrix::new(poly, proper)
    }
}

/// Pretty JSON in which objects are indented and arrays stay on one line,
/// with every float written as 17 significant digits.
pub struct CanonicalFormatter {
    depth: usize,
    has_key: Vec<bool>,
}

impl CanonicalFormatter {
    pub fn new() -> Self {
        CanonicalFormatter {
            depth: 0,
            has_key: Vec::new(),
        }
    }

    fn newline<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.depth {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Default for CanonicalFormatter {
    fn default() -> Self {
        Self::new()
    }
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.depth += 1;
        self.has_key.push(false);
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.depth -= 1;
        if self.has_key.pop() == Some(true) {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if let Some(k) = self.has_key.last_mut() {
            *k = true;
        }
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::new());
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    #[serde(rename = "A0")]
    pub a0: JsonMatrix,
    #[serde(rename = "A1")]
    pub a1: JsonMatrix,
    #[serde(rename = "B0")]
    pub b0: JsonMatrix,
    #[serde(rename = "B1")]
    pub b1: JsonMatrix,
    #[serde(rename = "C0")]
    pub c0: JsonMatrix,
    #[serde(rename = "C1")]
    pub c1: JsonMatrix,
    #[serde(rename = "D0")]
    pub d0: JsonMatrix,
    #[serde(rename = "D1")]
    pub d1: JsonMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionInfo {
    pub rank: usize,
    pub threshold: f64,
    /// Smallest value kept in the core.
    pub smallest_kept: Option<f64>,
    /// Largest value treated as zero.
    pub largest_dropped: Option<f64>,
    pub borderline: bool,
}

impl From<&CompressionResult> for CompressionInfo {
    fn from(c: &CompressionResult) -> Self {
        CompressionInfo {
            rank: c.rank,
            threshold: c.threshold,
            smallest_kept: c.rank.checked_sub(1).map(|i| c.spectrum[i]),
            largest_dropped: c.spectrum.get(c.rank).copied(),
            borderline: c.borderline,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompressionSummary {
    pub polynomial: Option<CompressionInfo>,
    pub strictly_proper: Option<CompressionInfo>,
    pub k_used: Option<usize>,
    pub stabilized: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub lambda: Entry,
    pub condition: analyze::Condition,
    pub deficiency: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub strongly_minimal: bool,
    pub controllable_inf: bool,
    pub observable_inf: bool,
    pub controllable_fin: bool,
    pub observable_fin: bool,
    /// Smallest ratio of observed singular value to threshold; absent when
    /// every condition is vacuous.
    pub min_margin: Option<f64>,
    pub witnesses: Vec<WitnessJson>,
}

impl From<&MinimalityCertificate> for CertificateSummary {
    fn from(cert: &MinimalityCertificate) -> Self {
        let m = cert.min_margin();
        CertificateSummary {
            strongly_minimal: cert.strongly_minimal(),
            controllable_inf: cert.controllable_inf.ok,
            observable_inf: cert.observable_inf.ok,
            controllable_fin: cert.controllable_fin.ok,
            observable_fin: cert.observable_fin.ok,
            min_margin: m.is_finite().then_some(m),
            witnesses: cert
                .witnesses
                .iter()
                .map(|w| WitnessJson {
                    lambda: Entry(w.lambda),
                    condition: w.condition,
                    deficiency: w.deficiency,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueJson {
    pub value: Entry,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralSummary {
    pub normal_rank: usize,
    pub indices_at_infinity: Vec<i64>,
    /// Partial multiplicities of `rev_d P` at zero (polynomial problems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversal_multiplicities: Option<Vec<i64>>,
    /// Same list via the quadratic shortcut (degree-2 polynomial problems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic_shortcut: Option<Vec<i64>>,
    /// Absent when the pencil is not square and regular.
    pub finite_eigenvalues: Option<Vec<EigenvalueJson>>,
    pub rank_l1: usize,
    /// `rank L₁` equals the polar degree read off the indices (polynomial problems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub tool: String,
    pub input_digest: String,
    pub kind: ProblemKind,
    pub structure: StructureTag,
    pub poly_degree: usize,
    pub rows: usize,
    pub cols: usize,
    pub state_dim: usize,
    pub blocks: Blocks,
    pub routes: RouteSummary,
    pub compression: CompressionSummary,
    pub symmetry_defect: Option<f64>,
    pub certificate: CertificateSummary,
    pub structural: Option<StructuralSummary>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ResultFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("result file: {e}")))
    }

    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    /// Rebuilds the pencil from the stored blocks.
    pub fn system(&self) -> Result<LinearSystemMatrix> {
        let (p, m, n) = (self.state_dim, self.rows, self.cols);
        let b = &self.blocks;
        LinearSystemMatrix::new(
            matrix_from_json(&b.a0, (p, p), "A0")?,
            matrix_from_json(&b.a1, (p, p), "A1")?,
            matrix_from_json(&b.b0, (p, n), "B0")?,
            matrix_from_json(&b.b1, (p, n), "B1")?,
            matrix_from_json(&b.c0, (m, p), "C0")?,
            matrix_from_json(&b.c1, (m, p), "C1")?,
            matrix_from_json(&b.d0, (m, n), "D0")?,
            matrix_from_json(&b.d1, (m, n), "D1")?,
        )
    }
}

pub fn blocks_of(lin: &LinearSystemMatrix) -> Blocks {
    Blocks {
        a0: matrix_to_json(&lin.a0),
        a1: matrix_to_json(&lin.a1),
        b0: matrix_to_json(&lin.b0),
        b1: matrix_to_json(&lin.b1),
        c0: matrix_to_json(&lin.c0),
        c1: matrix_to_json(&lin.c1),
        d0: matrix_to_json(&lin.d0),
        d1: matrix_to_json(&lin.d1),
    }
}

/// Structural data of a certified pencil. Failures of the infinity analysis
/// leave the summary out rather than failing the command.
pub fn structural_summary(
    lin: &LinearSystemMatrix,
    kind: ProblemKind,
    poly_degree: usize,
    tol: RankTolerance,
) -> Result<StructuralSummary> {
    let r = analyze::transfer_normal_rank(lin, tol);
    let ix = analyze::indices_at_infinity_unchecked(lin, r, tol)?;
    let (l0, l1) = lin.pencil_coeffs();
    let rank_l1 = if l1.is_empty() { 0 } else { crate::numkernel::rank_of(&l1, tol) };
    let polynomial = kind == ProblemKind::Polynomial;
    let reversal = if polynomial {
        Some(infinity_to_reversal(&ix, poly_degree)?.indices)
    } else {
        None
    };
    let quadratic = if polynomial && poly_degree == 2 {
        Some(analyze::quad_infinity_parts(lin, r, lin.state_dim(), tol)?.indices)
    } else {
        None
    };
    let finite = if l0.is_square() {
        match pencil_finite_eigenvalues(&l0, &l1) {
            Ok(v) => Some(
                v.into_iter()
                    .map(|(z, k)| EigenvalueJson {
                        value: Entry(z),
                        multiplicity: k,
                    })
                    .collect(),
            ),
            Err(Error::SingularPencil) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let polar: usize = ix.indices.iter().map(|&d| (-d).max(0) as usize).sum();
    Ok(StructuralSummary {
        normal_rank: r,
        indices_at_infinity: ix.indices,
        reversal_multiplicities: reversal,
        quadratic_shortcut: quadratic,
        finite_eigenvalues: finite,
        rank_l1,
        degree_consistent: polynomial.then_some(polar == rank_l1),
    })
}

/// Output of a command: exit status plus what to print.
#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: Vec<String>,
}

impl CommandOutput {
    fn failure(err: &Error) -> Self {
        CommandOutput {
            code: exit_code(err),
            stdout: String::new(),
            stderr: vec![format!("error: {err}")],
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Default)]
pub struct LinearizeFlags {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Overrides the tag stored in the problem file.
    pub structure: Option<StructureTag>,
    /// Absolute rank threshold.
    pub tol: Option<f64>,
    pub k: Option<usize>,
    /// Highest-precedence seed (flag or environment).
    pub seed: Option<u64>,
    pub strict: bool,
}

/// Resolved settings for one problem.
struct Settings {
    tag: StructureTag,
    tol: RankTolerance,
    k: Option<usize>,
    seed: u64,
}

fn settings(problem: &ProblemFile, flags: &LinearizeFlags) -> Result<Settings> {
    let tol = match flags.tol.or(problem.options.tolerance) {
        Some(t) => RankTolerance::Absolute(t),
        None => RankTolerance::default(),
    };
    tol.validate()?;
    Ok(Settings {
        tag: flags.structure.unwrap_or(problem.structure),
        tol,
        k: flags.k.or(problem.options.k),
        seed: flags.seed.or(problem.options.seed).unwrap_or(0),
    })
}

/// Linearizes a parsed problem; `digest` identifies the input bytes.
pub fn linearize_problem(problem: &ProblemFile, digest: &str, flags: &LinearizeFlags) -> Result<ResultFile> {
    let s = settings(problem, flags)?;
    let r = problem.to_rational()?;
    let opts = LinearizeOptions {
        tol: s.tol,
        k: s.k,
        minimality: MinimalityOptions {
            seed: s.seed,
            ..Default::default()
        },
    };
    let (lin, report) = linearize_rational_with(&r, s.tag, &opts)?;
    let cert = report.certificate.clone().expect("linearize always certifies");
    let mut warnings = report.warnings.clone();
    if !cert.strongly_minimal() {
        warnings.push(format!("strong minimality certificate failed: flags {:?}", cert.flags()));
    }
    let structural = if cert.strongly_minimal() {
        match structural_summary(&lin, problem.kind, r.poly.degree(), s.tol) {
            Ok(v) => Some(v),
            Err(e) => {
                warnings.push(format!("structural analysis skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(ResultFile {
        tool: TOOL.to_string(),
        input_digest: digest.to_string(),
        kind: problem.kind,
        structure: s.tag,
        poly_degree: r.poly.degree(),
        rows: lin.outputs(),
        cols: lin.inputs(),
        state_dim: lin.state_dim(),
        blocks: blocks_of(&lin),
        routes: report.routes(),
        compression: CompressionSummary {
            polynomial: report.poly_compression.as_ref().map(CompressionInfo::from),
            strictly_proper: report.proper_compression.as_ref().map(CompressionInfo::from),
            k_used: report.k_choice.map(|k| k.k_used),
            stabilized: report.k_choice.map(|k| k.stabilized),
        },
        symmetry_defect: report.symmetry_defect,
        certificate: CertificateSummary::from(&cert),
        structural,
        seed: s.seed,
        warnings,
    })
}

pub fn cmd_linearize(flags: &LinearizeFlags) -> CommandOutput {
    let run = || -> Result<CommandOutput> {
        let text = read(&flags.input)?;
        let problem = ProblemFile::parse(&text)?;
        let result = linearize_problem(&problem, &sha256_hex(text.as_bytes()), flags)?;
        std::fs::write(&flags.output, result.to_json())
            .map_err(|e| Error::Input(format!("{}: {e}", flags.output.display())))?;
        let mut out = CommandOutput {
            code: exit::OK,
            stdout: format!(
                "state_dim {} strongly_minimal {} -> {}\n",
                result.state_dim,
                result.certificate.strongly_minimal,
                flags.output.display()
            ),
            stderr: result.warnings.iter().map(|w| format!("warning: {w}")).collect(),
        };
        if flags.strict && !result.warnings.is_empty() {
            out.code = exit::STRICT;
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| CommandOutput::failure(&e))
}

/// Relative tolerance for transfer and expansion comparisons in `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-8;

/// Sample count for the Fourier extraction of expansion coefficients.
pub const EXPANSION_NODES: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub digest_matches: bool,
    pub certificate: CertificateSummary,
    /// `pointwise` for polynomial and state-space sources, `expansion` when
    /// the source is a truncated Laurent tail.
    pub method: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Re-certifies a result against its problem: strong minimality plus
/// transfer agreement. A Laurent tail is only known up to its depth, so
/// for those sources the expansion coefficients of the realization are
/// compared instead of point values.
pub fn verify(result: &ResultFile, problem: &ProblemFile, problem_bytes: &[u8]) -> Result<VerifyReport> {
    let lin = result.system()?;
    let r = problem.to_rational()?;
    if (lin.outputs(), lin.inputs()) != (r.rows(), r.cols()) {
        return Err(Error::Input(format!(
            "result is {}x{} but the problem is {}x{}",
            lin.outputs(),
            lin.inputs(),
            r.rows(),
            r.cols()
        )));
    }
    let cert = check_strong_minimality(
        &lin,
        &MinimalityOptions {
            seed: result.seed,
            ..Default::default()
        },
    )?;
    let (method, residual) = match &r.proper {
        Some(StrictlyProper::Tail(tail)) => ("expansion", expansion_residual(&lin, &r.poly, tail)?),
        _ => ("pointwise", pointwise_residual(&lin, &r, result.seed)?),
    };
    let passed = cert.strongly_minimal() && residual <= VERIFY_TOLERANCE;
    Ok(VerifyReport {
        digest_matches: sha256_hex(problem_bytes) == result.input_digest,
        certificate: CertificateSummary::from(&cert),
        method: method.to_string(),
        residual,
        tolerance: VERIFY_TOLERANCE,
        passed,
    })
}

fn pointwise_residual(lin: &LinearSystemMatrix, r: &RationalMatrix, seed: u64) -> Result<f64> {
    let mut rng = random::rng(seed ^ 0x7e57);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < 20 {
        attempts += 1;
        if attempts > 200 {
            return Err(Error::Internal("could not find 20 sample points away from poles".into()));
        }
        let z = random::point(&mut rng, 0.3, 3.0);
        let (Ok(got), Ok(want)) = (lin.transfer(z), r.eval(z)) else {
            continue;
        };
        worst = worst.max(analyze::relative_error(&got, &want));
        taken += 1;
    }
    Ok(worst)
}

fn expansion_residual(lin: &LinearSystemMatrix, poly: &PolyMatrix, tail: &LaurentTail) -> Result<f64> {
    let depth = tail.depth() as i64;
    let deg = poly.degree() as i64;
    let got = analyze::expansion_at_infinity(lin, -depth, deg, EXPANSION_NODES)?;
    let scale = tail.scale().max(poly.scale()).max(1.0);
    let mut worst: f64 = 0.0;
    for (idx, g) in got.iter().enumerate() {
        let j = idx as i64 - depth;
        let want = if j < 0 { tail.block((-j) as usize).clone() } else { poly.coeff(j as usize) };
        worst = worst.max(crate::numkernel::norm2(&(g - want)) / scale);
    }
    Ok(worst)
}

#[derive(Clone, Debug, Default)]
pub struct VerifyFlags {
    pub result: PathBuf,
    pub problem: PathBuf,
}

pub fn cmd_verify(flags: &VerifyFlags) -> CommandOutput {
    let run = || -> Result<CommandOutput> {
        let result = ResultFile::parse(&read(&flags.result)?)?;
        let problem_text = read(&flags.problem)?;
        let problem = ProblemFile::parse(&problem_text)?;
        let report = verify(&result, &problem, problem_text.as_bytes())?;
        let mut stderr = Vec::new();
        if !report.digest_matches {
            stderr.push("warning: problem digest differs from the one recorded in the result".to_string());
        }
        Ok(CommandOutput {
            code: if report.passed { exit::OK } else { exit::VERIFY },
            stdout: to_canonical_json(&report),
            stderr,
        })
    };
    run().unwrap_or_else(|e| CommandOutput::failure(&e))
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeFlags {
    pub result: PathBuf,
    pub infinity: bool,
    pub eigs: bool,
    pub audit: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices_at_infinity: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversal_multiplicities: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadratic_shortcut: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_eigenvalues: Option<Vec<EigenvalueJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_l1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polar_degree_consistent: Option<bool>,
}

/// Structural report for a stored result. With no section selected all
/// sections are produced.
pub fn analyze_result(result: &ResultFile, flags: &AnalyzeFlags) -> Result<AnalyzeReport> {
    let lin = result.system()?;
    let all = !(flags.infinity || flags.eigs || flags.audit);
    let tol = RankTolerance::default();
    let cert = check_strong_minimality(
        &lin,
        &MinimalityOptions {
            seed: result.seed,
            ..Default::default()
        },
    )?;
    if !cert.strongly_minimal() {
        return Err(Error::Precondition(format!(
            "stored pencil is not strongly minimal (flags {:?})",
            cert.flags()
        )));
    }
    let mut report = AnalyzeReport::default();
    if all || flags.infinity || flags.audit {
        let s = structural_summary(&lin, result.kind, result.poly_degree, tol)?;
        report.normal_rank = Some(s.normal_rank);
        if all || flags.infinity {
            report.indices_at_infinity = Some(s.indices_at_infinity);
            report.reversal_multiplicities = s.reversal_multiplicities;
            report.quadratic_shortcut = s.quadratic_shortcut;
        }
        if all || flags.audit {
            report.rank_l1 = Some(s.rank_l1);
            report.polar_degree_consistent = s.degree_consistent;
        }
    }
    if all || flags.eigs {
        let (l0, l1) = lin.pencil_coeffs();
        let eigs = if l0.is_square() {
            pencil_finite_eigenvalues(&l0, &l1)
        } else {
            Err(Error::SingularPencil)
        };
        let ev = match eigs {
            Err(Error::SingularPencil) if all => return Ok(report),
            other => other?,
        };
        report.finite_eigenvalues = Some(
            ev.into_iter()
                .map(|(z, k)| EigenvalueJson {
                    value: Entry(z),
                    multiplicity: k,
                })
                .collect(),
        );
    }
    Ok(report)
}

pub fn cmd_analyze(flags: &AnalyzeFlags) -> CommandOutput {
    let run = || -> Result<CommandOutput> {
        let result = ResultFile::parse(&read(&flags.result)?)?;
        let report = analyze_result(&result, flags)?;
        Ok(CommandOutput {
            code: exit::OK,
            stdout: to_canonical_json(&report),
            stderr: Vec::new(),
        })
    };
    run().unwrap_or_else(|e| {
        let mut out = CommandOutput::failure(&e);
        if matches!(e, Error::SingularPencil) {
            out.stderr.push(
                "finite eigenvalues of a singular pencil need a staircase reduction, which is not supported".into(),
            );
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{diag_real, norm2};

    fn example_2_1() -> ProblemFile {
        let p = PolyMatrix::new(vec![CMatrix::identity(2, 2), CMatrix::identity(2, 2), diag_real(&[0.0, 1.0])]).unwrap();
        ProblemFile::polynomial(&p, StructureTag::None)
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_canonical_json(&vec![0.1f64, -0.0, 1.0 / 3.0]);
        assert_eq!(s, "[1.0000000000000001e-1, -0.0000000000000000e0, 3.3333333333333331e-1]\n");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[2].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn problem_round_trip() {
        let f = example_2_1();
        let text = f.to_json();
        let g = ProblemFile::parse(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.to_json(), text);
    }

    #[test]
    fn bare_reals_are_accepted() {
        let text = r#"{"kind": "polynomial", "rows": 1, "cols": 1, "poly_coeffs": [[[0]], [[0]], [[1.5]]]}"#;
        let r = ProblemFile::parse(text).unwrap().to_rational().unwrap();
        assert_eq!(r.poly.coeff(2)[(0, 0)], c(1.5, 0.0));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(ProblemFile::parse("{"), Err(Error::Input(_))));
        let bad_shape = r#"{"kind": "polynomial", "rows": 2, "cols": 2, "poly_coeffs": [[[1, 2]]]}"#;
        let err = ProblemFile::parse(bad_shape).unwrap().to_rational().unwrap_err();
        assert!(err.to_string().contains("poly_coeffs[0]"));
        let both = r#"{"kind": "rational", "rows": 1, "cols": 1, "poly_coeffs": [], "laurent_tail": [[[1]], [[0]]],
            "state_space": {"A": [[1]], "E": [[1]], "B": [[1]], "C": [[1]]}}"#;
        assert!(ProblemFile::parse(both).unwrap().to_rational().is_err());
        assert!(ProblemFile::parse(r#"{"kind": "polynomial", "rows": 1, "cols": 1, "extra": 1}"#).is_err());
    }

    #[test]
    fn result_reassembles_exactly() {
        let f = example_2_1();
        let res = linearize_problem(&f, "x", &LinearizeFlags::default()).unwrap();
        let back = ResultFile::parse(&res.to_json()).unwrap();
        assert_eq!(back, res);
        let lin = back.system().unwrap();
        let again = linearize_rational_with(&f.to_rational().unwrap(), StructureTag::None, &LinearizeOptions::default()).unwrap().0;
        assert_eq!(lin, again);
        assert!(res.certificate.strongly_minimal);
        assert_eq!(res.state_dim, 1);
        let s = res.structural.unwrap();
        assert_eq!(s.reversal_multiplicities, Some(vec![1]));
        assert_eq!(s.quadratic_shortcut, Some(vec![1]));
    }

    #[test]
    fn verify_detects_tampering() {
        let f = example_2_1();
        let bytes = f.to_json();
        let res = linearize_problem(&f, &sha256_hex(bytes.as_bytes()), &LinearizeFlags::default()).unwrap();
        let ok = verify(&res, &f, bytes.as_bytes()).unwrap();
        assert!(ok.passed && ok.digest_matches, "{ok:?}");
        let mut bad = res.clone();
        bad.blocks.d0[0][0].0 += c(0.1, 0.0);
        let rep = verify(&bad, &f, bytes.as_bytes()).unwrap();
        assert!(!rep.passed);
        assert!(rep.residual > 1e-3);
    }

    #[test]
    fn tail_sources_verify_by_expansion() {
        let tail = LaurentTail::new(vec![CMatrix::identity(1, 1); 8]).unwrap();
        let r = RationalMatrix::new(PolyMatrix::zero(1, 1), Some(StrictlyProper::Tail(tail))).unwrap();
        let f = ProblemFile::rational(&r, StructureTag::None);
        let res = linearize_problem(&f, "", &LinearizeFlags::default()).unwrap();
        let rep = verify(&res, &f, b"").unwrap();
        assert_eq!(rep.method, "expansion");
        assert!(rep.passed, "{rep:?}");
        assert!(!rep.digest_matches);
        let lin = res.system().unwrap();
        assert!(norm2(&(lin.transfer(c(3.0, 0.0)).unwrap() - CMatrix::from_element(1, 1, c(0.5, 0.0)))) < 1e-14);
    }
}
