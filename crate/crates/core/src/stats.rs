//! Statistics over sets of (approximately) unitary matrices.
//!
//! Squared moduli of unitary matrices live in the Birkhoff polytope of
//! doubly stochastic matrices, which is convex: any convex combination
//! `sum x_i |U_i|^2` is again doubly stochastic. Entrywise means and
//! spreads of the moduli are taken on the squares so that the mean is
//! compatible with that convex structure.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::matrix::{hadamard_square, unitarity_defect, ComplexMatrix, SquaredModuliMatrix};

/// Unitarity tolerance required of ensemble members in [`convex_combine`].
pub const UNITARITY_TOL: f64 = 1e-9;

/// Negative-variance slack clipped to zero in [`sigma_moduli`].
const VARIANCE_CLIP: f64 = 1e-12;

/// Errors from ensemble construction and reduction.
#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    EmptyEnsemble,
    /// A member has a different dimension than the first one.
    DimensionMismatch { expected: usize, got: usize },
    /// Weights are negative, of the wrong length, or do not sum to one.
    BadWeights(String),
    /// The mean and spread follow fixed uniform-weight formulas.
    NonUniformWeights,
    /// A member fails the unitarity requirement (defect reported).
    MemberNotUnitary(usize, f64),
    /// An entrywise variance fell below the clipping slack.
    NegativeVariance(f64),
}

impl core::fmt::Display for StatsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StatsError::EmptyEnsemble => write!(f, "ensemble is empty"),
            StatsError::DimensionMismatch { expected, got } => {
                write!(f, "member dimension {got} differs from {expected}")
            }
            StatsError::BadWeights(msg) => write!(f, "bad weights: {msg}"),
            StatsError::NonUniformWeights => {
                write!(f, "mean and spread are defined for uniform weights only")
            }
            StatsError::MemberNotUnitary(k, d) => {
                write!(f, "member {k} has unitarity defect {d:e}")
            }
            StatsError::NegativeVariance(v) => {
                write!(f, "entrywise variance {v:e} below the clipping slack")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StatsError {}

/// An ensemble of same-sized complex matrices with optional convex
/// weights (uniform when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ModuliEnsemble {
    members: Vec<ComplexMatrix>,
    weights: Option<Vec<f64>>,
}

impl ModuliEnsemble {
    /// Uniformly weighted ensemble.
    pub fn new(members: Vec<ComplexMatrix>) -> Result<Self, StatsError> {
        Self::check_members(&members)?;
        Ok(Self {
            members,
            weights: None,
        })
    }

    /// Ensemble with explicit nonnegative weights summing to one.
    pub fn with_weights(members: Vec<ComplexMatrix>, weights: Vec<f64>) -> Result<Self, StatsError> {
        Self::check_members(&members)?;
        if weights.len() != members.len() {
            return Err(StatsError::BadWeights(format!(
                "{} weights for {} members",
                weights.len(),
                members.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(StatsError::BadWeights(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(StatsError::BadWeights(format!("weights sum to {total}")));
        }
        Ok(Self {
            members,
            weights: Some(weights),
        })
    }

    fn check_members(members: &[ComplexMatrix]) -> Result<(), StatsError> {
        let first = members.first().ok_or(StatsError::EmptyEnsemble)?;
        for m in members {
            if m.dim() != first.dim() {
                return Err(StatsError::DimensionMismatch {
                    expected: first.dim(),
                    got: m.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn members(&self) -> &[ComplexMatrix] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Effective weights: the stored ones, or uniform `1/len`.
    pub fn weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => {
                let w = 1.0 / self.members.len() as f64;
                self.members.iter().map(|_| w).collect()
            }
        }
    }

    fn require_uniform(&self) -> Result<(), StatsError> {
        if let Some(w) = &self.weights {
            let uniform = 1.0 / self.members.len() as f64;
            if w.iter().any(|x| math::abs(x - uniform) > 1e-12) {
                return Err(StatsError::NonUniformWeights);
            }
        }
        Ok(())
    }
}

/// A real matrix of entrywise statistics (means or spreads of moduli).
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl RealMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Entrywise mean modulus `sqrt(sum_i |U_i|^2 / n)`. The entrywise square
/// of the result is doubly stochastic whenever every member is exactly
/// unitary, because it is a convex combination of doubly stochastic
/// matrices.
pub fn mean_moduli(e: &ModuliEnsemble) -> Result<RealMatrix, StatsError> {
    e.require_uniform()?;
    let n = e.dim();
    let count = e.len() as f64;
    let mut entries = vec![0.0f64; n * n];
    for m in e.members() {
        for (acc, z) in entries.iter_mut().zip(m.entries()) {
            *acc += z.norm_sqr();
        }
    }
    for v in entries.iter_mut() {
        *v = math::sqrt(*v / count);
    }
    Ok(RealMatrix { n, entries })
}

/// Entrywise spread `sqrt(sum_i |U_i|^4 / n - <M>^4)`, the root of the
/// variance of the squared moduli. Zero for constant ensembles; tiny
/// negative radicands (floating-point noise) are clipped to zero. Note
/// that this population form is a biased estimator for small ensembles;
/// it is kept in this exact form deliberately.
pub fn sigma_moduli(e: &ModuliEnsemble) -> Result<RealMatrix, StatsError> {
    e.require_uniform()?;
    let n = e.dim();
    let count = e.len() as f64;
    let mean = mean_moduli(e)?;
    let mut entries = vec![0.0f64; n * n];
    for m in e.members() {
        for (acc, z) in entries.iter_mut().zip(m.entries()) {
            let p = z.norm_sqr();
            *acc += p * p;
        }
    }
    for (v, &mu) in entries.iter_mut().zip(mean.entries()) {
        let radicand = *v / count - mu * mu * mu * mu;
        if radicand < -VARIANCE_CLIP {
            return Err(StatsError::NegativeVariance(radicand));
        }
        *v = math::sqrt(radicand.max(0.0));
    }
    Ok(RealMatrix { n, entries })
}

/// Convex combination `sum_i x_i |U_i|^2` of the members' squared moduli.
/// Every member must be unitary within [`UNITARITY_TOL`]; the result is
/// then doubly stochastic up to that tolerance, by convexity of the
/// Birkhoff polytope.
pub fn convex_combine(e: &ModuliEnsemble) -> Result<SquaredModuliMatrix, StatsError> {
    let n = e.dim();
    for (k, m) in e.members().iter().enumerate() {
        let defect = unitarity_defect(m);
        if defect > UNITARITY_TOL {
            return Err(StatsError::MemberNotUnitary(k, defect));
        }
    }
    let weights = e.weights();
    let mut entries = vec![0.0f64; n * n];
    for (m, &w) in e.members().iter().zip(&weights) {
        let sq = hadamard_square(m);
        for (acc, &v) in entries.iter_mut().zip(sq.entries()) {
            *acc += w * v;
        }
    }
    Ok(SquaredModuliMatrix::from_raw(n, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::check_doubly_stochastic;
    use crate::parametrize::build_ckm3;
    use crate::parametrize::test_support::{toy3_params, toy3_unitary};
    use crate::unitarity::test_unistochastic;
    use num_complex::Complex64;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn permutation(n: usize, perm: &[usize]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n);
        for (i, &j) in perm.iter().enumerate() {
            m.set(i, j, Complex64::new(1.0, 0.0));
        }
        m
    }

    #[test]
    fn single_member_mean_is_its_moduli() {
        let u = toy3_unitary();
        let e = ModuliEnsemble::new(vec![u.clone()]).unwrap();
        let mean = mean_moduli(&e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((mean.get(i, j) - u.get(i, j).norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_permutations_mean_has_sqrt_half_entries() {
        let p1 = permutation(3, &[0, 1, 2]);
        let p2 = permutation(3, &[1, 2, 0]);
        let e = ModuliEnsemble::new(vec![p1, p2]).unwrap();
        let mean = mean_moduli(&e).unwrap();
        let half = 0.5f64.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let supports = [usize::from(j == i), usize::from(j == (i + 1) % 3)];
                let expected = match supports[0] + supports[1] {
                    0 => 0.0,
                    1 => half,
                    _ => 1.0,
                };
                assert!((mean.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sigma_vanishes_for_constant_ensemble() {
        let u = toy3_unitary();
        let e = ModuliEnsemble::new(vec![u.clone(), u.clone(), u]).unwrap();
        // the fourth-power form leaves ~sqrt(eps) rounding noise even for
        // a constant ensemble, so the bound is 1e-7 rather than 1e-12
        let sigma = sigma_moduli(&e).unwrap();
        assert!(sigma.entries().iter().all(|&v| v.abs() < 1e-7));
    }

    #[test]
    fn two_member_sigma_matches_half_gap_identity() {
        // at each entry sigma = |p - q| / 2 where p, q are the two squares
        let p1 = permutation(2, &[0, 1]);
        let h = {
            let s = Complex64::new(0.5f64.sqrt(), 0.0);
            ComplexMatrix::from_entries(2, vec![s, s, s, -s]).unwrap()
        };
        let e = ModuliEnsemble::new(vec![p1.clone(), h.clone()]).unwrap();
        let sigma = sigma_moduli(&e).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let p = p1.get(i, j).norm_sqr();
                let q = h.get(i, j).norm_sqr();
                assert!((sigma.get(i, j) - (p - q).abs() / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn noisy_ensemble_mean_square_is_doubly_stochastic() {
        // fifty small random rephasings-and-rotations of the same unitary
        let base = toy3_params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut members = Vec::new();
        for _ in 0..50 {
            let jitter = 1e-3;
            let p = MixingParameters3 {
                theta12: base.theta12 + rng.gen_range(-jitter..jitter),
                theta13: base.theta13 + rng.gen_range(-jitter..jitter),
                theta23: base.theta23 + rng.gen_range(-jitter..jitter),
                delta: base.delta + rng.gen_range(-jitter..jitter),
            };
            members.push(build_ckm3(&p));
        }
        let e = ModuliEnsemble::new(members).unwrap();
        let mean = mean_moduli(&e).unwrap();
        let sq: Vec<f64> = mean.entries().iter().map(|v| v * v).collect();
        let m = SquaredModuliMatrix::new(3, sq, 1e-12).unwrap();
        let report = check_doubly_stochastic(&m, 1e-10).unwrap();
        assert!(report.pass, "max defect {}", report.max_defect);
        // the spread tracks the injected noise scale
        let sigma = sigma_moduli(&e).unwrap();
        let max_sigma = sigma.entries().iter().cloned().fold(0.0, f64::max);
        assert!(max_sigma > 1e-5 && max_sigma < 1e-2, "sigma {max_sigma}");
        // baseline moduli recovered within the noise scale
        let truth = hadamard_square(&build_ckm3(&base));
        for (mu, t) in mean.entries().iter().zip(truth.entries()) {
            assert!((mu * mu - t).abs() < 5e-3);
        }
    }

    use crate::parametrize::MixingParameters3;

    #[test]
    fn convex_combine_with_unit_weight_is_hadamard_square() {
        let u = toy3_unitary();
        let e = ModuliEnsemble::with_weights(
            vec![u.clone(), ComplexMatrix::identity(3)],
            vec![1.0, 0.0],
        )
        .unwrap();
        let combined = convex_combine(&e).unwrap();
        let expected = hadamard_square(&u);
        for (a, b) in combined.entries().iter().zip(expected.entries()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn half_half_mixture_is_doubly_stochastic() {
        let e = ModuliEnsemble::with_weights(
            vec![toy3_unitary(), ComplexMatrix::identity(3)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let combined = convex_combine(&e).unwrap();
        let report = check_doubly_stochastic(&combined, 1e-12).unwrap();
        assert!(report.pass);
        // mixtures can leave the unistochastic set; just record the verdict
        let verdict = test_unistochastic(&combined, 1e-9).unwrap();
        let _ = verdict.physical;
    }

    #[test]
    fn mean_square_equals_uniform_convex_combination() {
        // third member: the 3x3 Fourier matrix (1/sqrt 3) omega^(jk)
        let fourier = {
            let omega = 2.0 * core::f64::consts::PI / 3.0;
            let entry =
                |j: usize, k: usize| Complex64::from_polar(1.0 / 3.0f64.sqrt(), omega * (j * k) as f64);
            let mut v = Vec::with_capacity(9);
            for j in 0..3 {
                for k in 0..3 {
                    v.push(entry(j, k));
                }
            }
            ComplexMatrix::from_entries(3, v).unwrap()
        };
        let members = vec![toy3_unitary(), ComplexMatrix::identity(3), fourier];
        let e = ModuliEnsemble::new(members).unwrap();
        let mean = mean_moduli(&e).unwrap();
        let combined = convex_combine(&e).unwrap();
        for (mu, c) in mean.entries().iter().zip(combined.entries()) {
            assert!((mu * mu - c).abs() < 1e-14);
        }
    }

    #[test]
    fn rephasing_members_leaves_statistics_unchanged() {
        use crate::matrix::GaugeTransform;
        let u = toy3_unitary();
        let g = GaugeTransform {
            left_phases: vec![0.3, 5.1, 2.2],
            right_phases: vec![0.0, 0.7, 4.4],
            ..GaugeTransform::identity(3)
        };
        let e1 = ModuliEnsemble::new(vec![u.clone(), ComplexMatrix::identity(3)]).unwrap();
        let e2 = ModuliEnsemble::new(vec![g.apply(&u), ComplexMatrix::identity(3)]).unwrap();
        let (m1, m2) = (mean_moduli(&e1).unwrap(), mean_moduli(&e2).unwrap());
        let (s1, s2) = (sigma_moduli(&e1).unwrap(), sigma_moduli(&e2).unwrap());
        for k in 0..9 {
            assert!((m1.entries()[k] - m2.entries()[k]).abs() < 1e-15);
            assert!((s1.entries()[k] - s2.entries()[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn constructor_rejections() {
        assert_eq!(
            ModuliEnsemble::new(Vec::new()).unwrap_err(),
            StatsError::EmptyEnsemble
        );
        let e = ModuliEnsemble::new(vec![ComplexMatrix::identity(2), ComplexMatrix::identity(3)]);
        assert!(matches!(e, Err(StatsError::DimensionMismatch { .. })));
        let bad = ModuliEnsemble::with_weights(
            vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)],
            vec![0.8, 0.8],
        );
        assert!(matches!(bad, Err(StatsError::BadWeights(_))));
        let nonuniform = ModuliEnsemble::with_weights(
            vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)],
            vec![0.75, 0.25],
        )
        .unwrap();
        assert_eq!(
            mean_moduli(&nonuniform).unwrap_err(),
            StatsError::NonUniformWeights
        );
        // non-unitary member rejected by convex_combine
        let mut warped = ComplexMatrix::identity(2);
        warped.set(0, 0, Complex64::new(0.9, 0.0));
        let e = ModuliEnsemble::new(vec![warped]).unwrap();
        assert!(matches!(
            convex_combine(&e),
            Err(StatsError::MemberNotUnitary(0, _))
        ));
    }
}
