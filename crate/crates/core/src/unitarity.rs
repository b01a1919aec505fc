//! First phenomenological model: decide unistochasticity of a 3x3 doubly
//! stochastic matrix and reconstruct the unitary matrix behind it.
//!
//! The mixing cosines follow from the first row and column alone; the
//! remaining freedom is one phase, and the matrix is unistochastic exactly
//! when the phase cosine solved from the corner entries is real with
//! `|cos delta| <= 1`. Four independent entries determine everything: the
//! other five follow from the line sums, and any of the four corner
//! relations then yields the same `cos delta`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::math;
use crate::matrix::{
    check_doubly_stochastic, hadamard_square, ComplexMatrix, SquaredModuliMatrix,
    StochasticityReport,
};
use crate::parametrize::{build_ckm3, MixingParameters3};
use crate::tagged::{from_sqrt_quotient, Tagged};

/// Tolerance below which a factor under a square root counts as vanished.
const DEGENERATE_EPS: f64 = 1e-12;

/// Errors of the unistochasticity decision pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitarityError {
    /// Input fails the doubly stochastic precondition; carries the report.
    NotDoublyStochastic(StochasticityReport),
    /// The four selected entries do not determine the matrix.
    DependentQuadruple(QuadrupleSelection),
    /// Reconstruction refused on an unphysical verdict.
    ReconstructionRefused(SeparationVerdict),
    /// Positions passed to a quadruple are not four distinct grid cells.
    InvalidPositions,
}

impl fmt::Display for UnitarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitarityError::NotDoublyStochastic(r) => {
                write!(f, "matrix is not doubly stochastic (max defect {})", r.max_defect)
            }
            UnitarityError::DependentQuadruple(q) => {
                write!(f, "dependent quadruple {:?}", q.positions())
            }
            UnitarityError::ReconstructionRefused(_) => {
                write!(f, "reconstruction refused: verdict is unphysical")
            }
            UnitarityError::InvalidPositions => write!(f, "invalid quadruple positions"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnitarityError {}

/// Four distinct positions in the 3x3 grid used as independent
/// coordinates. Stored sorted row-major for deterministic ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QuadrupleSelection {
    positions: [(usize, usize); 4],
}

impl QuadrupleSelection {
    pub fn new(mut positions: [(usize, usize); 4]) -> Result<Self, UnitarityError> {
        positions.sort_unstable();
        let in_grid = positions.iter().all(|&(i, j)| i < 3 && j < 3);
        let distinct = positions.windows(2).all(|w| w[0] != w[1]);
        if !in_grid || !distinct {
            return Err(UnitarityError::InvalidPositions);
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[(usize, usize); 4] {
        &self.positions
    }

    /// True when three of the four entries fill a whole row or column.
    pub fn contains_full_line(&self) -> bool {
        for line in 0..3 {
            let row = self.positions.iter().filter(|p| p.0 == line).count();
            let col = self.positions.iter().filter(|p| p.1 == line).count();
            if row == 3 || col == 3 {
                return true;
            }
        }
        false
    }
}

/// A cosine solved from the first line, with validity bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineEstimate {
    pub value: f64,
    /// `0 <= value <= 1` within tolerance and the radicand was nonnegative.
    pub valid: bool,
    /// The defining quotient was 0/0 (vanishing denominator).
    pub degenerate: bool,
}

impl CosineEstimate {
    fn from_square(sq: f64, denom_ok: bool) -> Self {
        if !denom_ok {
            return Self {
                value: 0.0,
                valid: false,
                degenerate: true,
            };
        }
        let valid = (-DEGENERATE_EPS..=1.0 + 1e-9).contains(&sq);
        Self {
            value: math::sqrt(sq.max(0.0).min(1.0)),
            valid,
            degenerate: false,
        }
    }
}

/// Mixing cosines from the first row and column of a squared-moduli
/// matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstLineSolution {
    pub c12: CosineEstimate,
    pub c13: CosineEstimate,
    pub c23: CosineEstimate,
}

impl FirstLineSolution {
    pub fn all_valid(&self) -> bool {
        self.c12.valid && self.c13.valid && self.c23.valid
    }

    pub fn cosines(&self) -> (f64, f64, f64) {
        (self.c12.value, self.c13.value, self.c23.value)
    }
}

/// Solves `c12 = sqrt(m11)`, `c13 = sqrt(m12/(1-m11))`,
/// `c23 = sqrt(m21/(1-m11))`. A vanishing `1 - m11` leaves the other two
/// cosines undefined; they are flagged degenerate, never thrown.
pub fn solve_first_line(m: &SquaredModuliMatrix) -> FirstLineSolution {
    let m11 = m.get(0, 0);
    let rest = 1.0 - m11;
    let denom_ok = math::abs(rest) > DEGENERATE_EPS;
    FirstLineSolution {
        c12: CosineEstimate::from_square(m11, true),
        c13: CosineEstimate::from_square(if denom_ok { m.get(0, 1) / rest } else { 0.0 }, denom_ok),
        c23: CosineEstimate::from_square(if denom_ok { m.get(1, 0) / rest } else { 0.0 }, denom_ok),
    }
}

/// Phase cosine from the independent moduli `(a, b, d, e)` = upper-left
/// 2x2 block of the moduli matrix. Negative radicands tag the result
/// imaginary; vanishing factors tag it degenerate.
pub fn cos_delta_s1(a: f64, b: f64, d: f64, e: f64) -> Tagged {
    let (a2, b2, d2, e2) = (a * a, b * b, d * d, e * e);
    let num = -math::sq(1.0 - a2) * (1.0 - e2) + (1.0 - a2) * (b2 + d2) - b2 * d2 * (1.0 + a2);
    from_sqrt_quotient(
        num,
        2.0 * a * b * d,
        &[1.0 - a2 - b2, 1.0 - a2 - d2],
        DEGENERATE_EPS,
    )
}

/// Phase cosine from the independent moduli `(b, c, d, f)` = the
/// off-corner entries of the first two rows.
pub fn cos_delta_s2(b: f64, c: f64, d: f64, f: f64) -> Tagged {
    let (b2, c2, d2, f2) = (b * b, c * c, d * d, f * f);
    let s = b2 + c2;
    let num = b2 * s - d2 * (b2 - c2 + c2 * s) - f2 * s * s;
    from_sqrt_quotient(num, 2.0 * b * c * d, &[1.0 - b2 - c2, s - d2], DEGENERATE_EPS)
}

/// Phase cosines solved from the four corner entries `m22, m23, m32, m33`
/// of a squared-moduli matrix, using the mixing cosines from the first
/// line. On an exactly doubly stochastic matrix all four coincide; on raw
/// measured data they differ, and the spread is the unitarity chi-square.
pub fn corner_cos_deltas(m: &SquaredModuliMatrix) -> [Tagged; 4] {
    let m11 = m.get(0, 0);
    let m12 = m.get(0, 1);
    let m21 = m.get(1, 0);
    let rest = 1.0 - m11;
    if math::abs(rest) < DEGENERATE_EPS {
        return [Tagged::Degenerate; 4];
    }
    let c12s = m11;
    let c13s = m12 / rest;
    let c23s = m21 / rest;
    let s13s = (1.0 - m11 - m12) / rest;
    let s23s = (1.0 - m11 - m21) / rest;
    // K = 2 sqrt(m11 m12 m21 (1-m11-m12)(1-m11-m21)) / (1-m11)^2
    let factors = [m11, m12, m21, 1.0 - m11 - m12, 1.0 - m11 - m21];
    let nums = [
        m.get(1, 1) - (c12s * c13s * c23s + s13s * s23s),
        (c12s * c23s * s13s + c13s * s23s) - m.get(1, 2),
        (c23s * s13s + c12s * c13s * s23s) - m.get(2, 1),
        m.get(2, 2) - (c13s * c23s + c12s * s13s * s23s),
    ];
    nums.map(|num| from_sqrt_quotient(num * rest * rest, 2.0, &factors, DEGENERATE_EPS))
}

/// Flat row-major index of a grid position.
fn idx(p: (usize, usize)) -> usize {
    p.0 * 3 + p.1
}

/// All quadruples of entries that determine the full matrix: the
/// parameter Jacobian of the four squared moduli has rank 4 at a generic
/// interior point. Quadruples with three entries in one line, and the
/// "hook" quadruples `row i minus (i,j)` union `column j minus (i,j)`,
/// carry exact linear relations and are excluded by the rank test.
pub fn enumerate_independent_quadruples() -> Vec<QuadrupleSelection> {
    // generic interior point: the exactly-unistochastic toy parameters
    let generic = MixingParameters3::from_cosines(
        1.0 / math::sqrt(3.0),
        math::sqrt(3.0) / 2.0,
        math::sqrt(6.0) / 4.0,
        4.0 * math::sqrt(15.0) / 25.0,
    )
    .expect("toy parameters in range");
    let mut params = [
        generic.theta12,
        generic.theta13,
        generic.theta23,
        generic.delta,
    ];
    let moduli_at = |p: &[f64; 4]| {
        let mp = MixingParameters3 {
            theta12: p[0],
            theta13: p[1],
            theta23: p[2],
            delta: p[3],
        };
        hadamard_square(&build_ckm3(&mp))
    };
    // central finite differences of all nine moduli in the four parameters
    let h = 1e-6;
    let mut jac = [[0.0f64; 4]; 9];
    for k in 0..4 {
        let saved = params[k];
        params[k] = saved + h;
        let plus = moduli_at(&params);
        params[k] = saved - h;
        let minus = moduli_at(&params);
        params[k] = saved;
        for (r, row) in jac.iter_mut().enumerate() {
            row[k] = (plus.entries()[r] - minus.entries()[r]) / (2.0 * h);
        }
    }
    let mut out = Vec::new();
    for a in 0..9usize {
        for b in a + 1..9 {
            for c in b + 1..9 {
                for d in c + 1..9 {
                    let rows = [a, b, c, d];
                    let mut sub = [0.0f64; 16];
                    for (r, &src) in rows.iter().enumerate() {
                        sub[r * 4..r * 4 + 4].copy_from_slice(&jac[src]);
                    }
                    let sv = linalg::singular_values(&sub, 4);
                    if linalg::rank_with_threshold(&sv, 1e-8) == 4 {
                        let positions = rows.map(|f| (f / 3, f % 3));
                        out.push(QuadrupleSelection { positions });
                    }
                }
            }
        }
    }
    out
}

/// A quadruple completion: the matrix rebuilt from four entries via the
/// line sums, with a flag for completed entries outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedQuadruple {
    pub matrix: SquaredModuliMatrix,
    pub out_of_polytope: bool,
}

/// Completes the five remaining entries from four given ones by solving
/// the line-sum constraints in the least-squares sense (the six line
/// equations have rank five for every independent quadruple).
pub fn complete_from_quadruple(
    m: &SquaredModuliMatrix,
    q: &QuadrupleSelection,
) -> Result<CompletedQuadruple, UnitarityError> {
    let known: Vec<usize> = q.positions().iter().map(|&p| idx(p)).collect();
    let unknown: Vec<usize> = (0..9).filter(|k| !known.contains(k)).collect();
    // six line constraints over the five unknowns
    let mut a = [[0.0f64; 5]; 6];
    let mut b = [1.0f64; 6];
    let mut lines: Vec<[usize; 3]> = Vec::with_capacity(6);
    for r in 0..3 {
        lines.push([r * 3, r * 3 + 1, r * 3 + 2]);
    }
    for c in 0..3 {
        lines.push([c, 3 + c, 6 + c]);
    }
    for (e, line) in lines.iter().enumerate() {
        for &cell in line {
            if let Some(u) = unknown.iter().position(|&x| x == cell) {
                a[e][u] = 1.0;
            } else {
                b[e] -= m.entries()[cell];
            }
        }
    }
    // normal equations: A^T A x = A^T b
    let mut ata = [0.0f64; 25];
    let mut atb = [0.0f64; 5];
    for i in 0..5 {
        for j in 0..5 {
            ata[i * 5 + j] = (0..6).map(|e| a[e][i] * a[e][j]).sum();
        }
        atb[i] = (0..6).map(|e| a[e][i] * b[e]).sum();
    }
    let x = linalg::solve(&ata, &atb, 5).ok_or(UnitarityError::DependentQuadruple(*q))?;
    let mut entries = vec![0.0f64; 9];
    for &k in &known {
        entries[k] = m.entries()[k];
    }
    let mut out_of_polytope = false;
    for (&k, &v) in unknown.iter().zip(&x) {
        entries[k] = v;
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            out_of_polytope = true;
        }
    }
    Ok(CompletedQuadruple {
        matrix: SquaredModuliMatrix::from_raw(3, entries),
        out_of_polytope,
    })
}

/// Phase-cosine candidates from one quadruple of entries.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupleCosDelta {
    pub completed: CompletedQuadruple,
    /// Distinct candidate values from the four corner relations on the
    /// completed matrix (they coincide there, so usually one value).
    pub candidates: Vec<Tagged>,
}

/// Completes the matrix from the quadruple and evaluates the corner
/// relations for `cos delta` on the completion, returning distinct values.
pub fn cos_delta_from_quadruple(
    m: &SquaredModuliMatrix,
    q: &QuadrupleSelection,
) -> Result<QuadrupleCosDelta, UnitarityError> {
    let completed = complete_from_quadruple(m, q)?;
    let all = corner_cos_deltas(&completed.matrix);
    let mut candidates: Vec<Tagged> = Vec::new();
    for t in all {
        if !candidates.iter().any(|c| c.approx_eq(&t, 1e-9)) {
            candidates.push(t);
        }
    }
    Ok(QuadrupleCosDelta {
        completed,
        candidates,
    })
}

/// Outcome of the unistochasticity decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationVerdict {
    /// Corner-relation candidates on the full input matrix, in the order
    /// `m22, m23, m32, m33`.
    pub cos_delta_values: Vec<Tagged>,
    /// The designated value: the `m22` corner relation.
    pub designated: Tagged,
    pub mixing: FirstLineSolution,
    pub physical: bool,
    pub diagnostics: Vec<String>,
}

impl SeparationVerdict {
    /// The physical `cos delta`, when the verdict is physical and the
    /// phase is determined.
    pub fn cos_delta(&self) -> Option<f64> {
        self.designated.real()
    }
}

/// Decides whether a doubly stochastic matrix is unistochastic: the
/// mixing cosines must be valid and the designated phase cosine real in
/// `[-1, 1]` within `tol`. When every corner relation degenerates (a
/// mixing sine or cosine vanishes) the phase drops out of the moduli and
/// the decision falls back to a direct moduli comparison.
pub fn test_unistochastic(
    m: &SquaredModuliMatrix,
    tol: f64,
) -> Result<SeparationVerdict, UnitarityError> {
    let report = check_doubly_stochastic(m, tol)
        .map_err(|_| UnitarityError::NotDoublyStochastic(stochasticity_snapshot(m, tol)))?;
    if !report.pass {
        return Err(UnitarityError::NotDoublyStochastic(report));
    }
    let mixing = solve_first_line(m);
    let corners = corner_cos_deltas(m);
    let designated = corners[0];
    let mut diagnostics = Vec::new();
    let physical = match designated {
        Tagged::Real(v) => {
            let ok = mixing.all_valid() && math::abs(v) <= 1.0 + tol;
            if !ok {
                diagnostics.push(format!("phase cosine {v} outside [-1, 1]"));
            }
            ok
        }
        Tagged::Imaginary(v) => {
            diagnostics.push(format!("phase cosine imaginary: {v} i"));
            false
        }
        Tagged::Degenerate => {
            // `m11 = 1` forces a direct sum of [1] and a 2x2 doubly
            // stochastic block, which is always unistochastic
            let ok = if mixing.c13.degenerate {
                true
            } else {
                // phase-free configuration: moduli must match the built matrix
                mixing.all_valid() && degenerate_moduli_match(m, &mixing, tol)
            };
            diagnostics.push(if ok {
                String::from("phase undetermined (degenerate mixing); moduli match")
            } else {
                String::from("degenerate mixing and moduli mismatch")
            });
            ok
        }
    };
    Ok(SeparationVerdict {
        cos_delta_values: corners.to_vec(),
        designated,
        mixing,
        physical,
        diagnostics,
    })
}

/// Rebuilds the stochasticity report for error reporting even when the
/// check itself failed on a domain error.
fn stochasticity_snapshot(m: &SquaredModuliMatrix, tol: f64) -> StochasticityReport {
    let row_defects: Vec<f64> = m.row_sums().iter().map(|s| math::abs(s - 1.0)).collect();
    let col_defects: Vec<f64> = m.col_sums().iter().map(|s| math::abs(s - 1.0)).collect();
    let max_defect = row_defects
        .iter()
        .chain(col_defects.iter())
        .fold(f64::INFINITY, |a, &b| if a.is_finite() { a.max(b) } else { b });
    StochasticityReport {
        pass: false,
        row_defects,
        col_defects,
        max_defect,
        tolerance: tol,
    }
}

/// When the phase drops out of the moduli, unistochasticity reduces to an
/// entrywise comparison against the matrix built from the first-line
/// cosines with an arbitrary phase.
fn degenerate_moduli_match(m: &SquaredModuliMatrix, mixing: &FirstLineSolution, tol: f64) -> bool {
    let (c12, c13, c23) = mixing.cosines();
    let p = match MixingParameters3::from_cosines(c12, c13, c23, 0.0) {
        Ok(p) => MixingParameters3 {
            delta: FRAC_PI_2,
            ..p
        },
        Err(_) => return false,
    };
    let built = hadamard_square(&build_ckm3(&p));
    let scale = tol.max(1e-9);
    m.entries()
        .iter()
        .zip(built.entries())
        .all(|(a, b)| math::abs(a - b) <= scale * 10.0)
}

/// Reconstructs the unitary matrix of a unistochastic input in the
/// canonical gauge (nonnegative first row and column). Rows or columns
/// whose leading entry vanishes keep an undetermined phase; it is fixed so
/// that their first nonzero entry is real positive, which maps the
/// identity moduli matrix to the identity.
pub fn reconstruct_unitary(m: &SquaredModuliMatrix) -> Result<ComplexMatrix, UnitarityError> {
    let verdict = test_unistochastic(m, crate::DEFAULT_TOL)?;
    if !verdict.physical {
        return Err(UnitarityError::ReconstructionRefused(verdict));
    }
    let p = if verdict.mixing.c13.degenerate {
        // m11 = 1: reduce to the lower 2x2 block, rotated by theta13 alone
        MixingParameters3 {
            theta12: 0.0,
            theta13: math::acos(math::sqrt(math::clamp_unit(m.get(1, 1)).max(0.0))),
            theta23: 0.0,
            delta: FRAC_PI_2,
        }
    } else {
        let (c12, c13, c23) = verdict.mixing.cosines();
        let cos_delta = match verdict.designated {
            Tagged::Real(v) => math::clamp_unit(v),
            _ => 0.0, // phase-free configuration; any value yields the moduli
        };
        MixingParameters3::from_cosines(c12, c13, c23, cos_delta)
            .map_err(|_| UnitarityError::ReconstructionRefused(verdict.clone()))?
    };
    let mut u = build_ckm3(&p);
    normalize_degenerate_lines(&mut u);
    Ok(u)
}

/// Fixes the free phases of rows (columns) whose first-column (first-row)
/// entry vanishes: the first nonzero entry of such a line is made real
/// positive.
fn normalize_degenerate_lines(u: &mut ComplexMatrix) {
    let n = u.dim();
    let eps = 1e-12;
    for i in 1..n {
        if u.get(i, 0).norm() < eps {
            if let Some(j) = (1..n).find(|&j| u.get(i, j).norm() > eps) {
                let z = u.get(i, j);
                let rot = z.conj() / z.norm();
                for k in 0..n {
                    let v = u.get(i, k);
                    u.set(i, k, v * rot);
                }
            }
        }
    }
    for j in 1..n {
        if u.get(0, j).norm() < eps {
            if let Some(i) = (1..n).find(|&i| u.get(i, j).norm() > eps) {
                let z = u.get(i, j);
                let rot = z.conj() / z.norm();
                for k in 0..n {
                    let v = u.get(k, j);
                    u.set(k, j, v * rot);
                }
            }
        }
    }
}

/// Counts numerically distinct `cos delta` expressions over all
/// (quadruple, corner relation) pairs: each pair is fingerprinted by its
/// values at eight random points off the Birkhoff polytope. On the
/// completion of a quadruple the four corner relations coincide, so the
/// count equals the number of independent quadruples.
pub fn count_distinct_cos_delta_expressions(seed: u64) -> usize {
    let quadruples = enumerate_independent_quadruples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = Uniform::new(0.05, 0.95);
    let draws: Vec<SquaredModuliMatrix> = (0..8)
        .map(|_| {
            SquaredModuliMatrix::from_raw(3, (0..9).map(|_| span.sample(&mut rng)).collect())
        })
        .collect();
    let mut fingerprints: Vec<Vec<(u8, i64)>> = Vec::new();
    for q in &quadruples {
        for rel in 0..4 {
            let mut fp = Vec::with_capacity(8);
            for d in &draws {
                let t = match cos_delta_from_quadruple(d, q) {
                    Ok(r) => corner_cos_deltas(&r.completed.matrix)[rel],
                    Err(_) => Tagged::Degenerate,
                };
                fp.push(match t {
                    Tagged::Real(v) => (0u8, quantize(v)),
                    Tagged::Imaginary(v) => (1u8, quantize(v)),
                    Tagged::Degenerate => (2u8, 0),
                });
            }
            if !fingerprints.contains(&fp) {
                fingerprints.push(fp);
            }
        }
    }
    fingerprints.len()
}

fn quantize(v: f64) -> i64 {
    (v * 1e6) as i64
}
