//! Small dense real linear algebra: Gaussian elimination and singular
//! values for the tiny (n <= 5) systems appearing in matrix completion and
//! Jacobian rank tests.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Solves `A x = b` in place for a small dense system, partial pivoting.
/// Returns `None` when the matrix is singular to working precision.
pub(crate) fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = math::abs(m[col * n + col]);
        for row in col + 1..n {
            let v = math::abs(m[row * n + col]);
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-13 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[row * n + j] -= f * m[col * n + j];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col * n + col];
        for row in 0..col {
            x[row] -= m[row * n + col] * x[col];
        }
    }
    Some(x)
}

/// Singular values of a small dense `n x n` matrix, descending.
///
/// Computed as square roots of the eigenvalues of `A^T A` via cyclic
/// Jacobi rotations; ample accuracy for rank decisions on 4x4 Jacobians.
pub(crate) fn singular_values(a: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    // s = A^T A, symmetric positive semidefinite
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[k * n + i] * a[k * n + j];
            }
            s[i * n + j] = acc;
        }
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += math::sq(s[p * n + q]);
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let spq = s[p * n + q];
                if math::abs(spq) < 1e-300 {
                    continue;
                }
                let theta = (s[q * n + q] - s[p * n + p]) / (2.0 * spq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let sn = t * c;
                for k in 0..n {
                    let skp = s[k * n + p];
                    let skq = s[k * n + q];
                    s[k * n + p] = c * skp - sn * skq;
                    s[k * n + q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[p * n + k];
                    let sqk = s[q * n + k];
                    s[p * n + k] = c * spk - sn * sqk;
                    s[q * n + k] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| s[i * n + i].max(0.0)).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev.into_iter().map(math::sqrt).collect()
}

/// Numerical rank from a singular-value ratio threshold.
pub(crate) fn rank_with_threshold(sv: &[f64], ratio: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v / max > ratio).count()
}
