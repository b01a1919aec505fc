//! Numerical separation for 4x4 matrices.
//!
//! For n = 4 the first row and column of a doubly stochastic matrix fix
//! five of the nine angles, and four free parameters remain: one angle
//! `b2` and three phases `beta1, beta2, gamma1`. The four inner moduli
//! give four residual equations in these unknowns; unistochasticity is
//! equivalent to the existence of a real solution. No closed form is
//! known, so the equations are solved by multi-start damped Newton
//! iteration, and the Jacobian rank at each root distinguishes isolated
//! solutions from continuum families (such as complex Hadamard matrices).

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::linalg;
use crate::math;
use crate::matrix::{hadamard_square, SquaredModuliMatrix};
use crate::parametrize::{build_unitary_n, GeneratingVectorsN};

/// The free parameters of a 4x4 unitary once the first line is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params4Free {
    /// Angle in `[0, pi/2]`.
    pub b2: f64,
    /// Phases in `[0, 2 pi)`.
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
}

impl Params4Free {
    fn as_array(&self) -> [f64; 4] {
        [self.b2, self.beta1, self.beta2, self.gamma1]
    }

    fn from_array(x: [f64; 4]) -> Self {
        Self {
            b2: x[0],
            beta1: x[1],
            beta2: x[2],
            gamma1: x[3],
        }
    }

    /// Joint phase conjugation `beta -> 2 pi - beta`; moduli-preserving.
    pub fn conjugated(&self) -> Self {
        let w = |p: f64| math::wrap_2pi(2.0 * PI - p);
        Self {
            b2: self.b2,
            beta1: w(self.beta1),
            beta2: w(self.beta2),
            gamma1: w(self.gamma1),
        }
    }

    /// Representative of the conjugation pair with `beta1` in `[0, pi]`.
    pub fn canonical(&self) -> Self {
        if self.beta1 > PI {
            self.conjugated()
        } else {
            *self
        }
    }
}

/// One cosine/sine pair of the first-line solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub cos: f64,
    pub sin: f64,
    /// Both squared values stayed in `[0, 1]` before clamping.
    pub valid: bool,
}

impl AnglePair {
    fn from_quotient(num: f64, den: f64) -> Self {
        if math::abs(den) < 1e-12 {
            return Self {
                cos: 0.0,
                sin: 1.0,
                valid: false,
            };
        }
        let c2 = num / den;
        let valid = (-1e-9..=1.0 + 1e-9).contains(&c2);
        let c2c = c2.max(0.0).min(1.0);
        Self {
            cos: math::sqrt(c2c),
            sin: math::sqrt(1.0 - c2c),
            valid,
        }
    }

    pub fn angle(&self) -> f64 {
        math::acos(math::clamp_unit(self.cos))
    }
}

/// Cosines and sines of the five angles determined by the first row and
/// column of a 4x4 squared-moduli matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstLine4 {
    pub a1: AnglePair,
    pub a2: AnglePair,
    pub a3: AnglePair,
    pub b1: AnglePair,
    pub c1: AnglePair,
}

impl FirstLine4 {
    pub fn all_valid(&self) -> bool {
        self.a1.valid && self.a2.valid && self.a3.valid && self.b1.valid && self.c1.valid
    }
}

/// Solves the five first-line angles: `cos^2 a1 = m11`, the remaining
/// column cosines by nested quotients of partial sums, and likewise
/// `b1, c1` along the first row. Out-of-range quotients are flagged, not
/// thrown.
pub fn first_line_params4(m: &SquaredModuliMatrix) -> FirstLine4 {
    debug_assert_eq!(m.dim(), 4);
    let m11 = m.get(0, 0);
    let (m21, m31) = (m.get(1, 0), m.get(2, 0));
    let (m12, m13) = (m.get(0, 1), m.get(0, 2));
    FirstLine4 {
        a1: AnglePair::from_quotient(m11, 1.0),
        a2: AnglePair::from_quotient(m21, 1.0 - m11),
        a3: AnglePair::from_quotient(m31, 1.0 - m11 - m21),
        b1: AnglePair::from_quotient(m12, 1.0 - m11),
        c1: AnglePair::from_quotient(m13, 1.0 - m11 - m12),
    }
}

/// Builds the 4x4 unitary fixed by the first line and the free
/// parameters, and returns its squared moduli.
fn moduli_from(fl: &FirstLine4, p: &Params4Free) -> SquaredModuliMatrix {
    let params = GeneratingVectorsN::standard4(
        fl.a1.angle(),
        fl.a2.angle(),
        fl.a3.angle(),
        fl.b1.angle(),
        p.b2,
        fl.c1.angle(),
        p.beta1,
        p.beta2,
        p.gamma1,
    );
    hadamard_square(&build_unitary_n(&params))
}

/// The four residuals `(f22 - m22, f23 - m23, f32 - m32, f33 - m33)` of
/// the inner-block moduli at the given free parameters, with the
/// first-line angles taken from `m` itself.
pub fn residuals4(m: &SquaredModuliMatrix, p: &Params4Free) -> [f64; 4] {
    let built = moduli_from(&first_line_params4(m), p);
    [
        built.get(1, 1) - m.get(1, 1),
        built.get(1, 2) - m.get(1, 2),
        built.get(2, 1) - m.get(2, 1),
        built.get(2, 2) - m.get(2, 2),
    ]
}

fn norm4(r: &[f64; 4]) -> f64 {
    math::sqrt(r.iter().map(|v| v * v).sum())
}

/// A converged root of the residual system.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution4 {
    pub params: Params4Free,
    /// The recovered separation quantities at the root.
    pub cos_b2: f64,
    pub cos_beta1: f64,
    pub cos_beta2: f64,
    pub cos_gamma1: f64,
    pub residual_norm: f64,
    /// Rank of the 4x4 parameter Jacobian at the root; below 4 the root
    /// sits on a continuum of solutions.
    pub jacobian_rank: usize,
    pub criteria_pass: bool,
}

/// The separation criteria at a solution: `cos b2` in `[0, 1]` and all
/// three phase cosines in `[-1, 1]`. Trivially true for roots found as
/// real angles; meaningful for analytically continued solutions.
pub fn check_criteria4(s: &Solution4) -> bool {
    (0.0..=1.0).contains(&s.cos_b2)
        && math::abs(s.cos_beta1) <= 1.0
        && math::abs(s.cos_beta2) <= 1.0
        && math::abs(s.cos_gamma1) <= 1.0
}

/// Multi-start solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solve4Config {
    /// Grid points for `b2` over `[0, pi/2]`.
    pub b2_starts: usize,
    /// Grid points per phase over `[0, 2 pi)`.
    pub phase_starts: usize,
    pub max_iterations: usize,
    /// A root must reach this residual norm.
    pub residual_tol: f64,
    /// Parameter-space distance below which two roots are the same.
    pub dedup_tol: f64,
}

impl Default for Solve4Config {
    fn default() -> Self {
        Self {
            b2_starts: 5,
            phase_starts: 8,
            max_iterations: 60,
            residual_tol: 1e-8,
            dedup_tol: 1e-5,
        }
    }
}

/// Outcome of [`solve4`]: the deduplicated roots plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solve4Outcome {
    pub solutions: Vec<Solution4>,
    pub diagnostics: Vec<String>,
}

const FD_STEP: f64 = 1e-6;

fn jacobian_at(fl: &FirstLine4, m: &SquaredModuliMatrix, x: &[f64; 4]) -> [f64; 16] {
    let mut jac = [0.0f64; 16];
    for k in 0..4 {
        let mut plus = *x;
        plus[k] += FD_STEP;
        let mut minus = *x;
        minus[k] -= FD_STEP;
        let rp = residuals_at(fl, m, &plus);
        let rm = residuals_at(fl, m, &minus);
        for r in 0..4 {
            jac[r * 4 + k] = (rp[r] - rm[r]) / (2.0 * FD_STEP);
        }
    }
    jac
}

fn residuals_at(fl: &FirstLine4, m: &SquaredModuliMatrix, x: &[f64; 4]) -> [f64; 4] {
    let built = moduli_from(fl, &Params4Free::from_array(*x));
    [
        built.get(1, 1) - m.get(1, 1),
        built.get(1, 2) - m.get(1, 2),
        built.get(2, 1) - m.get(2, 1),
        built.get(2, 2) - m.get(2, 2),
    ]
}

fn clamp_params(x: &mut [f64; 4]) {
    // reflect b2 into [0, pi/2]
    let mut b = x[0] % PI;
    if b < 0.0 {
        b += PI;
    }
    if b > FRAC_PI_2 {
        b = PI - b;
    }
    x[0] = b;
    for p in x.iter_mut().skip(1) {
        *p = math::wrap_2pi(*p);
    }
}

/// Distance between parameter vectors modulo `2 pi` on the phases.
fn params_distance(a: &Params4Free, b: &Params4Free) -> f64 {
    let wrap = |d: f64| {
        let w = math::abs(math::wrap_2pi(d));
        w.min(2.0 * PI - w)
    };
    let d0 = math::abs(a.b2 - b.b2);
    let d1 = wrap(a.beta1 - b.beta1);
    let d2 = wrap(a.beta2 - b.beta2);
    let d3 = wrap(a.gamma1 - b.gamma1);
    math::sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3)
}

/// Multi-start damped Newton search for all roots of the inner-block
/// residual system. Roots are deduplicated modulo joint phase conjugation
/// and sorted by residual norm, then by parameters; an empty list is
/// consistent with `m` not being unistochastic.
pub fn solve4(m: &SquaredModuliMatrix, config: &Solve4Config) -> Solve4Outcome {
    debug_assert_eq!(m.dim(), 4);
    let fl = first_line_params4(m);
    let mut out = Solve4Outcome {
        solutions: Vec::new(),
        diagnostics: Vec::new(),
    };
    if !fl.all_valid() {
        out.diagnostics
            .push(String::from("first row/column incompatible with the nested-cosine form"));
        return out;
    }
    let nb = config.b2_starts.max(1);
    let np = config.phase_starts.max(1);
    let mut roots: Vec<Params4Free> = Vec::new();
    for ib in 0..nb {
        let b2 = FRAC_PI_2 * (ib as f64 + 0.5) / nb as f64;
        for i1 in 0..np {
            for i2 in 0..np {
                for i3 in 0..np {
                    let mut x = [
                        b2,
                        2.0 * PI * i1 as f64 / np as f64,
                        2.0 * PI * i2 as f64 / np as f64,
                        2.0 * PI * i3 as f64 / np as f64,
                    ];
                    if let Some(root) =
                        newton(&fl, m, &mut x, config.max_iterations, config.residual_tol)
                    {
                        let canon = root.canonical();
                        if !roots
                            .iter()
                            .any(|r| params_distance(r, &canon) < config.dedup_tol)
                        {
                            roots.push(canon);
                        }
                    }
                }
            }
        }
    }
    if roots.is_empty() {
        out.diagnostics.push(String::from(
            "no convergent start: consistent with a non-unistochastic matrix",
        ));
        return out;
    }
    for p in roots {
        let x = p.as_array();
        let r = residuals_at(&fl, m, &x);
        let jac = jacobian_at(&fl, m, &x);
        let sv = linalg::singular_values(&jac, 4);
        let jacobian_rank = linalg::rank_with_threshold(&sv, 1e-7);
        let mut s = Solution4 {
            params: p,
            cos_b2: math::cos(p.b2),
            cos_beta1: math::cos(p.beta1),
            cos_beta2: math::cos(p.beta2),
            cos_gamma1: math::cos(p.gamma1),
            residual_norm: norm4(&r),
            jacobian_rank,
            criteria_pass: false,
        };
        s.criteria_pass = check_criteria4(&s);
        out.solutions.push(s);
    }
    out.solutions.sort_by(|a, b| {
        (a.residual_norm, a.params.as_array())
            .partial_cmp(&(b.residual_norm, b.params.as_array()))
            .expect("finite solutions")
    });
    out
}

fn newton(
    fl: &FirstLine4,
    m: &SquaredModuliMatrix,
    x: &mut [f64; 4],
    max_iterations: usize,
    residual_tol: f64,
) -> Option<Params4Free> {
    let mut r = residuals_at(fl, m, x);
    let mut rn = norm4(&r);
    for _ in 0..max_iterations {
        if rn < residual_tol {
            return Some(Params4Free::from_array(*x));
        }
        let jac = jacobian_at(fl, m, x);
        let step = linalg::solve(&jac, &r, 4)?;
        // backtracking damped step
        let mut lambda = 1.0f64;
        let mut improved = false;
        for _ in 0..8 {
            let mut trial = *x;
            for k in 0..4 {
                trial[k] -= lambda * step[k];
            }
            clamp_params(&mut trial);
            let tr = residuals_at(fl, m, &trial);
            let tn = norm4(&tr);
            if tn < rn {
                *x = trial;
                r = tr;
                rn = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rn < residual_tol {
        Some(Params4Free::from_array(*x))
    } else {
        None
    }
}
