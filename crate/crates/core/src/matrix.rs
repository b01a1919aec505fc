//! Foundational matrix types, stochasticity and unitarity diagnostics, and
//! the gauge canonical form.
//!
//! A unitary matrix is embedded into the Birkhoff polytope through the
//! entrywise (Hadamard) square `m_ij = |U_ij|^2`. The gauge subgroup
//! `K = D x P x T x C` (diagonal rephasing, permutations, transposition,
//! complex conjugation) acts on unitaries without changing that image, so
//! all diagnostics here are defined modulo `K`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;

/// An `n x n` matrix of squared moduli, a candidate member of the Birkhoff
/// polytope. Entries are stored as `V_ij^2`, not moduli: the doubly
/// stochastic constraints are linear in the squares.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredModuliMatrix {
    n: usize,
    entries: Vec<f64>,
}

/// Errors produced by matrix constructors and stochasticity checks.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixError {
    /// An entry is negative beyond tolerance; carries `(row, col, value)`.
    NegativeEntry(usize, usize, f64),
    /// An entry exceeds one beyond tolerance; carries `(row, col, value)`.
    EntryAboveOne(usize, usize, f64),
    /// The supplied data does not form an `n x n` grid.
    ShapeMismatch { expected: usize, got: usize },
    /// A matrix required to be unitary is not; carries the defect.
    NotUnitary(f64),
    /// Dimension outside the supported range (2..=4 for squared moduli).
    UnsupportedDimension(usize),
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::NegativeEntry(i, j, v) => {
                write!(f, "negative entry {v} at ({i}, {j})")
            }
            MatrixError::EntryAboveOne(i, j, v) => {
                write!(f, "entry {v} above one at ({i}, {j})")
            }
            MatrixError::ShapeMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            MatrixError::NotUnitary(d) => write!(f, "matrix is not unitary (defect {d})"),
            MatrixError::UnsupportedDimension(n) => write!(f, "unsupported dimension {n}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MatrixError {}

impl SquaredModuliMatrix {
    /// Builds a squared-moduli matrix from row-major entries, validating
    /// that every entry lies in `[0, 1]` within `tol`.
    pub fn new(n: usize, entries: Vec<f64>, tol: f64) -> Result<Self, MatrixError> {
        if !(2..=4).contains(&n) {
            return Err(MatrixError::UnsupportedDimension(n));
        }
        if entries.len() != n * n {
            return Err(MatrixError::ShapeMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for (k, &v) in entries.iter().enumerate() {
            if v < -tol {
                return Err(MatrixError::NegativeEntry(k / n, k % n, v));
            }
            if v > 1.0 + tol {
                return Err(MatrixError::EntryAboveOne(k / n, k % n, v));
            }
        }
        Ok(Self { n, entries })
    }

    /// Convenience constructor with the default tolerance.
    pub fn from_rows3(rows: [[f64; 3]; 3]) -> Self {
        let entries = rows.iter().flatten().copied().collect();
        Self::new(3, entries, crate::DEFAULT_TOL).expect("valid 3x3 squared moduli")
    }

    /// Internal constructor that skips range validation; used where the
    /// entries are squares by construction (Hadamard square, completions).
    pub(crate) fn from_raw(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Applies row and column permutations: `out[i][j] = self[rp[i]][cp[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(row_perm[i], col_perm[j]);
            }
        }
        Self { n, entries }
    }
}

/// Per-line deviation report of a stochasticity check.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticityReport {
    pub row_defects: Vec<f64>,
    pub col_defects: Vec<f64>,
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks the `2n` line sums of `m` against one and reports every defect.
/// A strictly negative entry (beyond `tol`) is a domain error naming the
/// offending index.
pub fn check_doubly_stochastic(
    m: &SquaredModuliMatrix,
    tol: f64,
) -> Result<StochasticityReport, MatrixError> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            let v = m.get(i, j);
            if v < -tol {
                return Err(MatrixError::NegativeEntry(i, j, v));
            }
        }
    }
    let row_defects: Vec<f64> = m.row_sums().iter().map(|s| math::abs(s - 1.0)).collect();
    let col_defects: Vec<f64> = m.col_sums().iter().map(|s| math::abs(s - 1.0)).collect();
    let max_defect = row_defects
        .iter()
        .chain(col_defects.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    Ok(StochasticityReport {
        pass: max_defect <= tol,
        row_defects,
        col_defects,
        max_defect,
        tolerance: tol,
    })
}

/// Dense complex `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_entries(n: usize, entries: Vec<Complex64>) -> Result<Self, MatrixError> {
        if entries.len() != n * n {
            return Err(MatrixError::ShapeMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(j, i).conj());
            }
        }
        out
    }

    pub fn conjugate(&self) -> ComplexMatrix {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> ComplexMatrix {
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(j, i));
            }
        }
        out
    }
}

/// Entrywise squared moduli `m_ij = |U_ij|^2` of a complex matrix.
pub fn hadamard_square(u: &ComplexMatrix) -> SquaredModuliMatrix {
    SquaredModuliMatrix::from_raw(u.dim(), u.entries().iter().map(|z| z.norm_sqr()).collect())
}

/// Maximum entrywise modulus of `U U* - I`; zero exactly on unitaries.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.dim();
    let p = u.mul(&u.adjoint());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((p.get(i, j) - target).norm());
        }
    }
    worst
}

/// One element of the gauge subgroup `K = D x P x T x C`, recorded so a
/// canonicalization can be undone: `apply(g, canonical) == original`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    /// Row rephasing angles in `[0, 2*pi)`.
    pub left_phases: Vec<f64>,
    /// Column rephasing angles in `[0, 2*pi)`.
    pub right_phases: Vec<f64>,
    pub row_permutation: Vec<usize>,
    pub col_permutation: Vec<usize>,
    pub transposed: bool,
    pub conjugated: bool,
}

impl GaugeTransform {
    pub fn identity(n: usize) -> Self {
        Self {
            left_phases: vec![0.0; n],
            right_phases: vec![0.0; n],
            row_permutation: (0..n).collect(),
            col_permutation: (0..n).collect(),
            transposed: false,
            conjugated: false,
        }
    }

    /// Applies the transform: conjugate/transpose first, then permute rows
    /// and columns, then rephase rows and columns.
    pub fn apply(&self, u: &ComplexMatrix) -> ComplexMatrix {
        let n = u.dim();
        let mut w = u.clone();
        if self.conjugated {
            w = w.conjugate();
        }
        if self.transposed {
            w = w.transpose();
        }
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let phase = self.left_phases[i] + self.right_phases[j];
                let rot = Complex64::new(math::cos(phase), math::sin(phase));
                out.set(i, j, rot * w.get(self.row_permutation[i], self.col_permutation[j]));
            }
        }
        out
    }
}

const PHASE_EPS: f64 = 1e-12;

/// Brings a unitary into the gauge canonical form: first row and first
/// column real and nonnegative, and the leading independent phase in
/// `[0, pi]` (otherwise the conjugate representative is returned and the
/// `conjugated` flag set).
///
/// Zero entries in the first line leave the corresponding rephasing angle
/// free; it is fixed to 0 by convention. The returned transform satisfies
/// `transform.apply(&canonical) == u` up to rounding.
pub fn canonical_gauge_form(u: &ComplexMatrix) -> (ComplexMatrix, GaugeTransform) {
    let n = u.dim();
    let mut right = vec![0.0f64; n];
    for j in 0..n {
        let z = u.get(0, j);
        if z.norm() > PHASE_EPS {
            right[j] = math::atan2(z.im, z.re);
        }
    }
    let mut w = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let rot = Complex64::new(math::cos(-right[j]), math::sin(-right[j]));
            w.set(i, j, u.get(i, j) * rot);
        }
    }
    let mut left = vec![0.0f64; n];
    for i in 1..n {
        let z = w.get(i, 0);
        if z.norm() > PHASE_EPS {
            left[i] = math::atan2(z.im, z.re);
        }
    }
    let mut canon = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let rot = Complex64::new(math::cos(-left[i]), math::sin(-left[i]));
            canon.set(i, j, rot * w.get(i, j));
        }
    }
    // Leading-phase convention: the rephasing-invariant quartet
    // U11 * conj(U12) * conj(U21) * U22 reduces, in this gauge, to the
    // (2,2) entry itself. Its phase is taken in [-pi, 0]; when it lands in
    // (0, pi) the conjugate representative is the canonical one.
    let mut conjugated = false;
    if n >= 2 {
        let pivot = canon.get(1, 1);
        if pivot.im > PHASE_EPS {
            canon = canon.conjugate();
            conjugated = true;
        }
    }
    let transform = GaugeTransform {
        left_phases: left.iter().map(|&p| math::wrap_2pi(p)).collect(),
        right_phases: right.iter().map(|&p| math::wrap_2pi(p)).collect(),
        row_permutation: (0..n).collect(),
        col_permutation: (0..n).collect(),
        transposed: false,
        conjugated,
    };
    (canon, transform)
}
