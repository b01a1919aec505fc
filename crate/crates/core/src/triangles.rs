//! Second phenomenological model: unitarity-triangle geometry.
//!
//! Each orthogonality relation between two rows or two columns of a
//! unitary matrix sums three complex terms to zero, and so draws a
//! triangle in the complex plane. Scaling by the first term (positive in
//! the canonical gauge) puts two vertices at the origin and at `(1, 0)`;
//! the remaining side lengths and vertex angles are functions of the
//! moduli alone. The module also recovers mixing parameters from the four
//! measurable phase angles of the inner 2x2 block.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::matrix::SquaredModuliMatrix;
use crate::parametrize::MixingParameters3;
use crate::tagged::Tagged;
use crate::unitarity::{complete_from_quadruple, QuadrupleSelection, UnitarityError};

const EPS: f64 = 1e-12;

/// Which orthogonality relation generates the triangle: `C` pairs two
/// columns, `R` pairs two rows (zero-based line indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthogonalityId {
    C12,
    C13,
    C23,
    R12,
    R13,
    R23,
}

impl OrthogonalityId {
    pub const ALL: [OrthogonalityId; 6] = [
        OrthogonalityId::C12,
        OrthogonalityId::C13,
        OrthogonalityId::C23,
        OrthogonalityId::R12,
        OrthogonalityId::R13,
        OrthogonalityId::R23,
    ];

    /// `(columns, j, k)`: whether the paired lines are columns, and their
    /// zero-based indices.
    fn lines(&self) -> (bool, usize, usize) {
        match self {
            OrthogonalityId::C12 => (true, 0, 1),
            OrthogonalityId::C13 => (true, 0, 2),
            OrthogonalityId::C23 => (true, 1, 2),
            OrthogonalityId::R12 => (false, 0, 1),
            OrthogonalityId::R13 => (false, 0, 2),
            OrthogonalityId::R23 => (false, 1, 2),
        }
    }
}

impl fmt::Display for OrthogonalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OrthogonalityId::C12 => "C12",
            OrthogonalityId::C13 => "C13",
            OrthogonalityId::C23 => "C23",
            OrthogonalityId::R12 => "R12",
            OrthogonalityId::R13 => "R13",
            OrthogonalityId::R23 => "R23",
        };
        write!(f, "{s}")
    }
}

/// Errors specific to triangle geometry and angle recovery.
#[derive(Debug, Clone, PartialEq)]
pub enum TriangleError {
    /// The three sides are collinear: zero-area triangle.
    Collinear,
    /// The sides do not close into a triangle, or are not real.
    NotATriangle,
    /// A phase angle is a right angle; its tangent is infinite.
    RightAngle(&'static str),
    /// A denominator of the closed-form recovery vanished.
    DegenerateConfiguration,
}

impl fmt::Display for TriangleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriangleError::Collinear => write!(f, "degenerate (collinear) triangle"),
            TriangleError::NotATriangle => write!(f, "side lengths do not form a triangle"),
            TriangleError::RightAngle(which) => {
                write!(f, "angle {which} is a right angle (infinite tangent)")
            }
            TriangleError::DegenerateConfiguration => {
                write!(f, "degenerate configuration: vanishing denominator")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TriangleError {}

/// Ratio of two square-rooted products: `sqrt(prod num) / sqrt(prod
/// den)`, with each negative factor contributing a power of `i`.
fn side_ratio(num: &[f64], den: &[f64]) -> Tagged {
    let mut mag = 1.0f64;
    let mut power = 0i32;
    for &x in num {
        if math::abs(x) < EPS {
            return if x.is_nan() { Tagged::Degenerate } else { Tagged::Real(0.0) };
        }
        if x < 0.0 {
            power += 1;
        }
        mag *= math::abs(x);
    }
    let mut dmag = 1.0f64;
    for &x in den {
        if math::abs(x) < EPS {
            return Tagged::Degenerate;
        }
        if x < 0.0 {
            power -= 1;
        }
        dmag *= math::abs(x);
    }
    let v = math::sqrt(mag / dmag);
    match power.rem_euclid(4) {
        0 => Tagged::Real(v),
        1 => Tagged::Imaginary(v),
        2 => Tagged::Real(-v),
        _ => Tagged::Imaginary(-v),
    }
}

/// Triangle side lengths `(R_c, R_t)` for one orthogonality relation,
/// evaluated on the completion of `m` from the quadruple `q`. The side
/// from the middle line is `R_c`, from the last line `R_t`; both are
/// scaled by the first term, so negative completed entries make a side
/// imaginary.
pub fn side_lengths(
    m: &SquaredModuliMatrix,
    id: OrthogonalityId,
    q: &QuadrupleSelection,
) -> Result<(Tagged, Tagged), UnitarityError> {
    let completed = complete_from_quadruple(m, q)?.matrix;
    Ok(sides_on(&completed, id))
}

/// Triangle side lengths straight from a (completed) moduli matrix.
pub fn sides_on(m: &SquaredModuliMatrix, id: OrthogonalityId) -> (Tagged, Tagged) {
    let (columns, j, k) = id.lines();
    // term r of the orthogonality sum is U(r,j) U(r,k)* for column pairs
    // (U(j,r) U(k,r)* for row pairs); its squared modulus is the product
    // of the two moduli
    let term = |r: usize| {
        if columns {
            [m.get(r, j), m.get(r, k)]
        } else {
            [m.get(j, r), m.get(k, r)]
        }
    };
    let scale = term(0);
    let rc = side_ratio(&term(1), &scale);
    let rt = side_ratio(&term(2), &scale);
    (rc, rt)
}

/// Whether sides `(1, R_c, R_t)` close into a triangle: both must be
/// real, nonnegative, and satisfy `|R_c - R_t| <= 1 <= R_c + R_t`.
pub fn triangle_exists(rc: &Tagged, rt: &Tagged) -> bool {
    match (rc, rt) {
        (Tagged::Real(a), Tagged::Real(b)) => {
            *a >= 0.0 && *b >= 0.0 && math::abs(a - b) <= 1.0 + EPS && a + b + EPS >= 1.0
        }
        _ => false,
    }
}

/// Apex coordinates `(rho, eta)` of the triangle with vertices `(0,0)`,
/// `(1,0)` and side lengths `R_c` (from the origin) and `R_t` (from
/// `(1,0)`); `eta >= 0` by convention.
pub fn apex(rc: f64, rt: f64) -> (f64, f64) {
    let rho = (1.0 + rc * rc - rt * rt) / 2.0;
    let eta = math::sqrt((rc * rc - rho * rho).max(0.0));
    (rho, eta)
}

/// Law-of-cosines vertex angles `(phi1, phi2, phi3)` of the triangle with
/// sides `(1, R_c, R_t)`: `phi3` at the origin, `phi2` at `(1, 0)`,
/// `phi1` at the apex. Their sum is `pi`.
pub fn triangle_angles(rc: f64, rt: f64) -> Result<(f64, f64, f64), TriangleError> {
    if !triangle_exists(&Tagged::Real(rc), &Tagged::Real(rt)) {
        return Err(TriangleError::NotATriangle);
    }
    if rc < EPS || rt < EPS {
        return Err(TriangleError::Collinear);
    }
    let cos3 = math::clamp_unit((1.0 + rc * rc - rt * rt) / (2.0 * rc));
    let cos2 = math::clamp_unit((1.0 + rt * rt - rc * rc) / (2.0 * rt));
    let cos1 = math::clamp_unit((rc * rc + rt * rt - 1.0) / (2.0 * rc * rt));
    if math::abs(cos1) >= 1.0 - EPS {
        return Err(TriangleError::Collinear);
    }
    Ok((math::acos(cos1), math::acos(cos2), math::acos(cos3)))
}

/// One triangle in full: sides, existence, apex, and vertex angles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGeometry {
    pub id: OrthogonalityId,
    /// `(R_c, R_t)`; the third side is 1 by the scaling convention.
    pub sides: (Tagged, Tagged),
    pub apex: Option<(f64, f64)>,
    pub vertex_angles: Option<(f64, f64, f64)>,
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// Assembles the full geometry of one triangle from the completion of `m`
/// on the quadruple `q`.
pub fn triangle_geometry(
    m: &SquaredModuliMatrix,
    id: OrthogonalityId,
    q: &QuadrupleSelection,
) -> Result<TriangleGeometry, UnitarityError> {
    let (rc, rt) = side_lengths(m, id, q)?;
    let mut diagnostics = Vec::new();
    let valid = triangle_exists(&rc, &rt);
    let (apex_pt, angles) = if valid {
        let (a, b) = (rc.real().unwrap(), rt.real().unwrap());
        match triangle_angles(a, b) {
            Ok(ang) => (Some(apex(a, b)), Some(ang)),
            Err(e) => {
                diagnostics.push(format!("{e}"));
                (Some(apex(a, b)), None)
            }
        }
    } else {
        diagnostics.push(match (&rc, &rt) {
            (Tagged::Real(_), Tagged::Real(_)) => String::from("sides violate triangle inequality"),
            _ => format!("imaginary or degenerate side: R_c = {rc}, R_t = {rt}"),
        });
        (None, None)
    };
    Ok(TriangleGeometry {
        id,
        sides: (rc, rt),
        apex: apex_pt,
        vertex_angles: angles,
        valid,
        diagnostics,
    })
}

/// Tangents of the four measurable phase angles: `t_ij = tan(arg U_ij)`
/// for the inner 2x2 block, `i, j` in `{2, 3}` (one-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentQuadruple {
    pub t22: f64,
    pub t23: f64,
    pub t32: f64,
    pub t33: f64,
}

/// Evaluates the four phase-angle tangents from mixing parameters. A
/// vanishing denominator means the angle is a right angle; that is
/// reported as an error naming the angle.
pub fn omega_tangents(p: &MixingParameters3) -> Result<TangentQuadruple, TriangleError> {
    let (c12, c13, c23) = p.cosines();
    let s13 = math::sin(p.theta13);
    let s23 = math::sin(p.theta23);
    let (sd, cd) = (math::sin(p.delta), math::cos(p.delta));
    let entries: [(&'static str, f64, f64); 4] = [
        ("omega22", s13 * s23, c12 * c13 * c23),
        ("omega23", c13 * s23, -c12 * c23 * s13),
        ("omega32", c23 * s13, -c12 * c13 * s23),
        ("omega33", c13 * c23, c12 * s13 * s23),
    ];
    let mut t = [0.0f64; 4];
    for (slot, (name, b, a)) in t.iter_mut().zip(entries) {
        let den = a + b * cd;
        if math::abs(den) < EPS {
            return Err(TriangleError::RightAngle(name));
        }
        *slot = b * sd / den;
    }
    Ok(TangentQuadruple {
        t22: t[0],
        t23: t[1],
        t32: t[2],
        t33: t[3],
    })
}

/// Squared mixing cosines recovered from angle tangents, with a validity
/// flag for the `[0, 1]` range conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredCosines {
    pub c12_sq: f64,
    pub c13_sq: f64,
    pub c23_sq: f64,
    pub valid: bool,
}

/// Closed-form recovery of the squared mixing cosines from the four
/// phase-angle tangents. The recovery is unique when the denominators do
/// not vanish.
pub fn recover_cij_from_tangents(t: &TangentQuadruple) -> Result<SquaredCosines, TriangleError> {
    let (t22, t23, t32, t33) = (t.t22, t.t23, t.t32, t.t33);
    let den = t22 * t23 * (t33 - t32) + t32 * t33 * (t22 - t23);
    if math::abs(den) < EPS {
        return Err(TriangleError::DegenerateConfiguration);
    }
    let c13_sq = t23 * t33 * (t22 - t32) / den;
    let c23_sq = t32 * t33 * (t22 - t23) / den;
    let n1 = (t22 - t23) * (t22 - t32) * (t23 - t33) * (t32 - t33);
    let n2 = math::sq(t23 * t32) + math::sq(t22 * t33)
        + math::sq(t23 * t32) * (t22 * t22 + t33 * t33)
        + math::sq(t22 * t33) * (t23 * t23 + t32 * t32)
        - 2.0 * t22 * t23 * t32 * t33
            * (1.0 + (t23 + t32) * (t22 + t33) - t23 * t32 - t22 * t33);
    if math::abs(n2) < EPS {
        return Err(TriangleError::DegenerateConfiguration);
    }
    let c12_sq = n1 / n2;
    let in_range = |x: f64| (-EPS..=1.0 + EPS).contains(&x);
    Ok(SquaredCosines {
        c12_sq,
        c13_sq,
        c23_sq,
        valid: in_range(c12_sq) && in_range(c13_sq) && in_range(c23_sq),
    })
}

/// Phase-cosine candidates recovered from angle tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct CosDeltaCandidates {
    /// Distinct real roots with `|cos delta| <= 1`, all four tangent
    /// equations pooled, sorted descending.
    pub candidates: Vec<f64>,
    /// The root common to all four equations, when one exists.
    pub consistent: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Solves, for each tangent equation, the quadratic in `cos delta`
/// obtained with `sin delta = +sqrt(1 - cos^2 delta)`; pools the real
/// in-range roots and marks the one satisfying all four equations. Both
/// quadratic roots are kept because the tangents carry no quadrant
/// information.
pub fn cos_delta_candidates_from_tangents(t: &TangentQuadruple) -> CosDeltaCandidates {
    let mut out = CosDeltaCandidates {
        candidates: Vec::new(),
        consistent: None,
        diagnostics: Vec::new(),
    };
    let tangents = [t.t22, t.t23, t.t32, t.t33];
    if tangents.iter().all(|v| math::abs(*v) < EPS) {
        out.diagnostics
            .push(String::from("all tangents vanish: phase-free (degenerate) input"));
        return out;
    }
    let cos = match recover_cij_from_tangents(t) {
        Ok(c) if c.valid => c,
        _ => {
            out.diagnostics
                .push(String::from("mixing cosines not recoverable from tangents"));
            return out;
        }
    };
    let c12 = math::sqrt(cos.c12_sq.max(0.0));
    let c13 = math::sqrt(cos.c13_sq.max(0.0));
    let c23 = math::sqrt(cos.c23_sq.max(0.0));
    let s13 = math::sqrt((1.0 - cos.c13_sq).max(0.0));
    let s23 = math::sqrt((1.0 - cos.c23_sq).max(0.0));
    // t = B sin(delta) / (A + B cos(delta)) per equation
    let pairs = [
        (c12 * c13 * c23, s13 * s23),
        (-c12 * c23 * s13, c13 * s23),
        (-c12 * c13 * s23, c23 * s13),
        (c12 * s13 * s23, c13 * c23),
    ];
    let mut per_equation: [Vec<f64>; 4] = Default::default();
    for ((a, b), (tv, roots)) in pairs.into_iter().zip(tangents.into_iter().zip(&mut per_equation))
    {
        // B^2 (1 + t^2) c^2 + 2 A B t^2 c + (A^2 t^2 - B^2) = 0
        let qa = b * b * (1.0 + tv * tv);
        let qb = 2.0 * a * b * tv * tv;
        let qc = a * a * tv * tv - b * b;
        if math::abs(qa) < EPS {
            continue;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let sd = math::sqrt(disc);
        for root in [(-qb + sd) / (2.0 * qa), (-qb - sd) / (2.0 * qa)] {
            if math::abs(root) <= 1.0 + 1e-9 {
                roots.push(math::clamp_unit(root));
            }
        }
    }
    if per_equation.iter().all(|r| r.is_empty()) {
        out.diagnostics
            .push(String::from("no real root in any tangent equation"));
        return out;
    }
    for roots in &per_equation {
        for &r in roots {
            if !out.candidates.iter().any(|c| math::abs(c - r) < 1e-9) {
                out.candidates.push(r);
            }
        }
    }
    out.candidates
        .sort_by(|x, y| y.partial_cmp(x).expect("finite candidates"));
    out.consistent = out
        .candidates
        .iter()
        .copied()
        .find(|&c| {
            per_equation
                .iter()
                .all(|roots| roots.iter().any(|&r| math::abs(r - c) < 1e-8))
        });
    out
}

/// Which triangle side feeds the phase-cosine formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideRelation {
    /// The side from the middle term, `R_c` of the column-1/3 triangle.
    CSide,
    /// The side from the last term, `R_t` of the column-1/3 triangle.
    TSide,
}

/// Phase cosine from one unitarity-triangle side length and the mixing
/// cosines; breaks the multiplicity of the tangent-only recovery.
pub fn cos_delta_from_side(
    c12: f64,
    c13: f64,
    c23: f64,
    r: f64,
    which: SideRelation,
) -> Tagged {
    let s13 = math::sqrt((1.0 - c13 * c13).max(0.0));
    let s23 = math::sqrt((1.0 - c23 * c23).max(0.0));
    let (num, den) = match which {
        SideRelation::CSide => (
            c12 * c12 * c23 * c23 * c23 * c23 * s13 * s13
                + c13 * c13 * c23 * c23 * s23 * s23
                - c12 * c12 * s13 * s13 * r * r,
            2.0 * c12 * c13 * c23 * c23 * c23 * s13 * s23,
        ),
        SideRelation::TSide => (
            c12 * c12 * s13 * s13 * r * r
                - c13 * c13 * c23 * c23 * s23 * s23
                - c12 * c12 * s13 * s13 * s23 * s23 * s23 * s23,
            2.0 * c12 * c13 * c23 * s13 * s23 * s23 * s23,
        ),
    };
    if math::abs(den) < EPS {
        return Tagged::Degenerate;
    }
    Tagged::Real(num / den)
}
