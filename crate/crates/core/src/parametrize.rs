//! Construction of unitary matrices from angles and phases.
//!
//! A unitary `U_n` factors into an ordered product of one-vector-generated
//! blocks, `U_n = B_n^0 . B_{n-1}^1 ... B_1^{n-1}`, where each `B_m` is a
//! special unitary matrix built from a single complex unit vector `y_m`.
//! The first column of `B_m` is `y_m`; column `k+1` is the derivative of
//! the first column with respect to the `k`-th polar angle, with the
//! earlier angles frozen at `pi/2`.
//!
//! The generating vectors are chosen so that the first row and the first
//! column of `U_n` come out nonnegative: the top-level vector is real with
//! positive leading cosine, the lower-level vectors start with `-cos` and
//! carry the free phases on their remaining components, and the final
//! one-dimensional block is `-1`.
//!
//! For n = 3 this yields the standard mixing form with three angles and a
//! single phase; [`build_ckm3`] writes that matrix entry for entry and
//! agrees with the generic builder.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::math;
use crate::matrix::{unitarity_defect, ComplexMatrix, MatrixError};

/// The four physical parameters of a 3x3 unitary matrix: three mixing
/// angles in `[0, pi/2]` and one phase in `[0, pi]`, all in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingParameters3 {
    pub theta12: f64,
    pub theta13: f64,
    pub theta23: f64,
    pub delta: f64,
}

/// Parameter-range violations for mixing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterRangeError {
    pub name: &'static str,
    pub value: f64,
}

impl core::fmt::Display for ParameterRangeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "parameter {} = {} out of range", self.name, self.value)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParameterRangeError {}

const RANGE_SLACK: f64 = 1e-12;

impl MixingParameters3 {
    /// Validating constructor; angles must lie in `[0, pi/2]`, the phase
    /// in `[0, pi]` (range endpoints permitted).
    pub fn new(
        theta12: f64,
        theta13: f64,
        theta23: f64,
        delta: f64,
    ) -> Result<Self, ParameterRangeError> {
        for (name, value, hi) in [
            ("theta12", theta12, FRAC_PI_2),
            ("theta13", theta13, FRAC_PI_2),
            ("theta23", theta23, FRAC_PI_2),
            ("delta", delta, PI),
        ] {
            if !(value >= -RANGE_SLACK && value <= hi + RANGE_SLACK) {
                return Err(ParameterRangeError { name, value });
            }
        }
        Ok(Self {
            theta12,
            theta13,
            theta23,
            delta,
        })
    }

    /// Constructor from the cosine representation: `c12, c13, c23` in
    /// `[0, 1]` and `cos delta` in `[-1, 1]`.
    pub fn from_cosines(
        c12: f64,
        c13: f64,
        c23: f64,
        cos_delta: f64,
    ) -> Result<Self, ParameterRangeError> {
        for (name, value) in [("c12", c12), ("c13", c13), ("c23", c23)] {
            if !(value >= -RANGE_SLACK && value <= 1.0 + RANGE_SLACK) {
                return Err(ParameterRangeError { name, value });
            }
        }
        if !(cos_delta >= -1.0 - RANGE_SLACK && cos_delta <= 1.0 + RANGE_SLACK) {
            return Err(ParameterRangeError {
                name: "cos_delta",
                value: cos_delta,
            });
        }
        Ok(Self {
            theta12: math::acos(math::clamp_unit(c12)),
            theta13: math::acos(math::clamp_unit(c13)),
            theta23: math::acos(math::clamp_unit(c23)),
            delta: math::acos(math::clamp_unit(cos_delta)),
        })
    }

    pub fn cosines(&self) -> (f64, f64, f64) {
        (
            math::cos(self.theta12),
            math::cos(self.theta13),
            math::cos(self.theta23),
        )
    }

    pub fn cos_delta(&self) -> f64 {
        math::cos(self.delta)
    }
}

/// One generating unit vector: `m - 1` polar angles and `m` per-component
/// phases for a vector in dimension `m`. Component `i` of the vector is
/// `exp(i phase[i]) * sin(t_0) ... sin(t_{i-1}) * cos(t_i)` (the final
/// component has no cosine factor).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingVector {
    pub angles: Vec<f64>,
    pub phases: Vec<f64>,
}

impl GeneratingVector {
    fn dim(&self) -> usize {
        self.phases.len()
    }

    /// The vector itself as the first column of its block.
    fn components(&self) -> Vec<Complex64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m);
        let mut sin_prod = 1.0;
        for i in 0..m {
            let radial = if i < m - 1 {
                math::cos(self.angles[i])
            } else {
                1.0
            };
            out.push(polar(self.phases[i]) * sin_prod * radial);
            if i < m - 1 {
                sin_prod *= math::sin(self.angles[i]);
            }
        }
        out
    }
}

#[inline]
fn polar(phase: f64) -> Complex64 {
    Complex64::new(math::cos(phase), math::sin(phase))
}

/// Generating vectors `y_n, ..., y_1` for a unitary of dimension
/// `n` in `{2, 3, 4}`: `vectors[k]` is `y_{n-k}` of dimension `n - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingVectorsN {
    n: usize,
    vectors: Vec<GeneratingVector>,
}

impl GeneratingVectorsN {
    /// Validating constructor: `vectors[k]` must have `n - k` phases and
    /// `n - k - 1` angles.
    pub fn new(vectors: Vec<GeneratingVector>) -> Result<Self, MatrixError> {
        let n = vectors.len();
        if !(2..=4).contains(&n) {
            return Err(MatrixError::UnsupportedDimension(n));
        }
        for (k, v) in vectors.iter().enumerate() {
            let m = n - k;
            if v.phases.len() != m || v.angles.len() != m - 1 {
                return Err(MatrixError::ShapeMismatch {
                    expected: m,
                    got: v.phases.len(),
                });
            }
        }
        Ok(Self { n, vectors })
    }

    /// n = 2 convention: one angle, no free phase. The top vector is
    /// `(cos a1, sin a1)` and the trailing block is `-1`.
    pub fn standard2(a1: f64) -> Self {
        Self {
            n: 2,
            vectors: vec![
                GeneratingVector {
                    angles: vec![a1],
                    phases: vec![0.0, 0.0],
                },
                GeneratingVector {
                    angles: vec![],
                    phases: vec![PI],
                },
            ],
        }
    }

    /// n = 3 convention: top vector real with angles `(a1, a2)`, middle
    /// vector `(-cos b1, exp(i beta1) sin b1)`, trailing block `-1`.
    pub fn standard3(a1: f64, a2: f64, b1: f64, beta1: f64) -> Self {
        Self {
            n: 3,
            vectors: vec![
                GeneratingVector {
                    angles: vec![a1, a2],
                    phases: vec![0.0; 3],
                },
                GeneratingVector {
                    angles: vec![b1],
                    phases: vec![PI, beta1],
                },
                GeneratingVector {
                    angles: vec![],
                    phases: vec![PI],
                },
            ],
        }
    }

    /// n = 4 convention: top vector real with angles `(a1, a2, a3)`, then
    /// `(-cos b1, e^{i beta1} sin b1 cos b2, e^{i beta2} sin b1 sin b2)`,
    /// then `(-cos c1, e^{i gamma1} sin c1)`, trailing block `-1`.
    #[allow(clippy::too_many_arguments)]
    pub fn standard4(
        a1: f64,
        a2: f64,
        a3: f64,
        b1: f64,
        b2: f64,
        c1: f64,
        beta1: f64,
        beta2: f64,
        gamma1: f64,
    ) -> Self {
        Self {
            n: 4,
            vectors: vec![
                GeneratingVector {
                    angles: vec![a1, a2, a3],
                    phases: vec![0.0; 4],
                },
                GeneratingVector {
                    angles: vec![b1, b2],
                    phases: vec![PI, beta1, beta2],
                },
                GeneratingVector {
                    angles: vec![c1],
                    phases: vec![PI, gamma1],
                },
                GeneratingVector {
                    angles: vec![],
                    phases: vec![PI],
                },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[GeneratingVector] {
        &self.vectors
    }
}

/// Builds the `m x m` block generated by one unit vector. The first column
/// is the vector; column `k+1` is its derivative with respect to angle `k`
/// with angles `0..k` frozen at `pi/2`.
fn block_from_vector(v: &GeneratingVector) -> ComplexMatrix {
    let m = v.dim();
    let mut b = ComplexMatrix::zeros(m);
    for (i, z) in v.components().iter().enumerate() {
        b.set(i, 0, *z);
    }
    for col in 1..m {
        // derivative with respect to angle `col - 1`
        let t = col - 1;
        b.set(t, col, -polar(v.phases[t]) * math::sin(v.angles[t]));
        let mut sin_prod = 1.0;
        for i in col..m {
            let radial = if i < m - 1 {
                math::cos(v.angles[i])
            } else {
                1.0
            };
            b.set(
                i,
                col,
                polar(v.phases[i]) * math::cos(v.angles[t]) * sin_prod * radial,
            );
            if i < m - 1 {
                sin_prod *= math::sin(v.angles[i]);
            }
        }
    }
    b
}

/// Embeds an `m x m` block into dimension `n` as `I_{n-m} (+) B`.
fn embed(b: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let m = b.dim();
    let mut out = ComplexMatrix::identity(n);
    let off = n - m;
    for i in 0..m {
        for j in 0..m {
            out.set(off + i, off + j, b.get(i, j));
        }
    }
    out
}

/// Builds `U_n` as the ordered product of the embedded blocks generated by
/// the given vectors. The first column of the result is the top vector and
/// the first row is the nonnegative nested-sine form.
pub fn build_unitary_n(params: &GeneratingVectorsN) -> ComplexMatrix {
    let n = params.dim();
    let mut u = ComplexMatrix::identity(n);
    for v in params.vectors() {
        u = u.mul(&embed(&block_from_vector(v), n));
    }
    u
}

/// The explicit 3x3 standard mixing form, written entry for entry.
/// Identical to [`build_unitary_n`] with the n = 3 convention under the
/// substitution `a1 -> theta12, a2 -> theta23, b1 -> theta13,
/// beta1 -> delta`.
pub fn build_ckm3(p: &MixingParameters3) -> ComplexMatrix {
    let (c12, c13, c23) = p.cosines();
    let s12 = math::sin(p.theta12);
    let s13 = math::sin(p.theta13);
    let s23 = math::sin(p.theta23);
    let e = polar(p.delta);
    let r = |x: f64| Complex64::new(x, 0.0);
    ComplexMatrix::from_entries(
        3,
        vec![
            r(c12),
            r(c13 * s12),
            r(s12 * s13),
            r(c23 * s12),
            -r(c12 * c13 * c23) - e * (s13 * s23),
            -r(c12 * c23 * s13) + e * (c13 * s23),
            r(s12 * s23),
            e * (c23 * s13) - r(c12 * c13 * s23),
            -e * (c13 * c23) - r(c12 * s13 * s23),
        ],
    )
    .expect("shape is 3x3")
}

/// Builds the `mn x mn` block unitary with blocks `p_ij * D_j Q_j`, where
/// `D_j = diag(1, exp(i phases[j][0]), ...)` rephases every block column
/// except the first. The construction keeps the first row and first column
/// of the result fixed while the free phases vary, so its squared-moduli
/// matrix does not determine the unitary: a whole phase family maps to the
/// same moduli.
pub fn compose_block_counterexample(
    p: &ComplexMatrix,
    qs: &[ComplexMatrix],
    phases: &[Vec<f64>],
) -> Result<ComplexMatrix, MatrixError> {
    let m = p.dim();
    if qs.len() != m || phases.len() != m {
        return Err(MatrixError::ShapeMismatch {
            expected: m,
            got: qs.len().min(phases.len()),
        });
    }
    let n = qs[0].dim();
    const UNITARY_TOL: f64 = 1e-9;
    let defect = unitarity_defect(p);
    if defect > UNITARY_TOL {
        return Err(MatrixError::NotUnitary(defect));
    }
    for q in qs {
        if q.dim() != n {
            return Err(MatrixError::ShapeMismatch {
                expected: n,
                got: q.dim(),
            });
        }
        let defect = unitarity_defect(q);
        if defect > UNITARY_TOL {
            return Err(MatrixError::NotUnitary(defect));
        }
    }
    for (j, ph) in phases.iter().enumerate() {
        let expected = if j == 0 { 0 } else { n - 1 };
        if ph.len() != expected {
            return Err(MatrixError::ShapeMismatch {
                expected,
                got: ph.len(),
            });
        }
    }
    let mut out = ComplexMatrix::zeros(m * n);
    for bj in 0..m {
        // block column bj uses D_bj * Q_bj
        let mut q = qs[bj].clone();
        if bj > 0 {
            for r in 1..n {
                let rot = polar(phases[bj][r - 1]);
                for c in 0..n {
                    q.set(r, c, rot * q.get(r, c));
                }
            }
        }
        for bi in 0..m {
            let scale = p.get(bi, bj);
            for r in 0..n {
                for c in 0..n {
                    out.set(bi * n + r, bj * n + c, scale * q.get(r, c));
                }
            }
        }
    }
    Ok(out)
}

/// Frozen exact-value fixtures shared by the crate's unit tests.
#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Mixing parameters with cosines `(1/sqrt 3, sqrt 3 / 2, sqrt 6 / 4)`
    /// and `cos delta = 4 sqrt 15 / 25`.
    pub(crate) fn toy3_params() -> MixingParameters3 {
        MixingParameters3::from_cosines(
            1.0 / 3.0f64.sqrt(),
            3.0f64.sqrt() / 2.0,
            6.0f64.sqrt() / 4.0,
            4.0 * 15.0f64.sqrt() / 25.0,
        )
        .unwrap()
    }

    /// The exact unitary matrix whose squared moduli are
    /// `[[1/3, 1/2, 1/6], [1/4, 2/5, 7/20], [5/12, 1/10, 29/60]]`,
    /// written in closed radicals.
    pub(crate) fn toy3_unitary() -> ComplexMatrix {
        let s = f64::sqrt;
        ComplexMatrix::from_entries(
            3,
            vec![
                Complex64::new(1.0 / s(3.0), 0.0),
                Complex64::new(1.0 / s(2.0), 0.0),
                Complex64::new(1.0 / s(6.0), 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(-9.0 / 20.0 * s(1.5), -s(77.0 / 2.0) / 20.0),
                Complex64::new(7.0 / (20.0 * s(2.0)), s(231.0 / 2.0) / 20.0),
                Complex64::new(0.5 * s(5.0 / 3.0), 0.0),
                Complex64::new(-13.0 / (20.0 * s(10.0)), s(231.0 / 10.0) / 20.0),
                Complex64::new(-61.0 / (20.0 * s(30.0)), -3.0 / 20.0 * s(77.0 / 10.0)),
            ],
        )
        .unwrap()
    }
}
