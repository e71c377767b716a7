//! Exact Smith reduction over `Q[λ]`, used as an oracle for partial
//! multiplicities at zero.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Polynomial with rational coefficients in ascending powers, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QPoly(Vec<BigRational>);

impl QPoly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        QPoly(c)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
    }

    pub fn zero() -> Self {
        QPoly(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    /// Multiplicity of the root at zero; `None` for the zero polynomial.
    pub fn order_at_zero(&self) -> Option<usize> {
        self.0.iter().position(|x| !x.is_zero())
    }

    fn sub(&self, other: &QPoly) -> QPoly {
        let n = self.0.len().max(other.0.len());
        let z = BigRational::zero();
        QPoly::new(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) - other.0.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    fn add(&self, other: &QPoly) -> QPoly {
        let n = self.0.len().max(other.0.len());
        let z = BigRational::zero();
        QPoly::new(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) + other.0.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    fn mul(&self, other: &QPoly) -> QPoly {
        if self.is_zero() || other.is_zero() {
            return QPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPoly::new(out)
    }

    /// Euclidean division; `divisor` must be nonzero.
    fn divrem(&self, divisor: &QPoly) -> (QPoly, QPoly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = &divisor.0[dd];
        let mut rem = self.0.clone();
        let mut quot = vec![BigRational::zero(); rem.len().saturating_sub(dd)];
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let f = &rem[rem.len() - 1] / lead;
            for (i, d) in divisor.0.iter().enumerate() {
                rem[k + i] -= &f * d;
            }
            quot[k] = f;
            rem.pop();
            while rem.last().is_some_and(Zero::is_zero) {
                rem.pop();
            }
        }
        (QPoly::new(quot), QPoly::new(rem))
    }

    fn monic(&self) -> QPoly {
        match self.0.last() {
            Some(l) => QPoly(self.0.iter().map(|x| x / l).collect()),
            None => QPoly::zero(),
        }
    }
}

/// Invariant factors of a polynomial matrix (monic, each dividing the
/// next), one per unit of rank.
#[allow(clippy::needless_range_loop)]
pub fn invariant_factors(mut a: Vec<Vec<QPoly>>) -> Vec<QPoly> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        loop {
            // Pivot: nonzero entry of least degree in the trailing block.
            let pivot = (t..rows)
                .flat_map(|i| (t..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| !a[i][j].is_zero())
                .min_by_key(|&(i, j)| a[i][j].degree());
            let Some((pi, pj)) = pivot else {
                return out;
            };
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            let mut dirty = false;
            for i in t + 1..rows {
                let (q, r) = a[i][t].divrem(&a[t][t]);
                for j in t..cols {
                    let s = q.mul(&a[t][j]);
                    a[i][j] = a[i][j].sub(&s);
                }
                dirty |= !r.is_zero();
            }
            for j in t + 1..cols {
                let (q, r) = a[t][j].divrem(&a[t][t]);
                for i in t..rows {
                    let s = q.mul(&a[i][t]);
                    a[i][j] = a[i][j].sub(&s);
                }
                dirty |= !r.is_zero();
            }
            if dirty {
                continue;
            }
            // Row and column are clear; the pivot must divide the rest.
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !a[i][j].divrem(&a[t][t]).1.is_zero());
            match offender {
                Some((i, _)) => {
                    for j in t..cols {
                        a[t][j] = a[t][j].add(&a[i][j]);
                    }
                }
                None => break,
            }
        }
        out.push(a[t][t].monic());
    }
    out
}

/// Partial multiplicities at zero, nondecreasing, zeros included.
pub fn smith_mults_at_zero(a: Vec<Vec<QPoly>>) -> Vec<i64> {
    invariant_factors(a)
        .iter()
        .map(|s| s.order_at_zero().expect("invariant factors are nonzero") as i64)
        .collect()
}

/// Integer entry polynomials (ascending coefficients) to a `QPoly` matrix.
pub fn int_matrix(entries: &[Vec<Vec<i64>>]) -> Vec<Vec<QPoly>> {
    entries
        .iter()
        .map(|row| row.iter().map(|c| QPoly::from_ints(c)).collect())
        .collect()
}
