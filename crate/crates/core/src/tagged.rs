//! Tagged real values.
//!
//! Quantities such as `cos delta` or a triangle side are obtained from
//! expressions containing square roots of data-dependent radicands. On
//! non-unistochastic input a radicand may turn negative, which makes the
//! quantity imaginary; a vanishing factor makes it undefined. Both outcomes
//! are physics diagnostics rather than errors, so they are carried as tags.

use core::fmt;

/// A real-valued diagnostic quantity that may come out imaginary or
/// undefined on unphysical input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tagged {
    /// A plain real value.
    Real(f64),
    /// A purely imaginary value; the payload is the signed imaginary part,
    /// i.e. `Imaginary(-0.03)` prints as `-0.03 i`.
    Imaginary(f64),
    /// A vanishing denominator or radicand made the expression undefined.
    Degenerate,
}

impl Tagged {
    pub fn is_real(&self) -> bool {
        matches!(self, Tagged::Real(_))
    }

    pub fn is_imaginary(&self) -> bool {
        matches!(self, Tagged::Imaginary(_))
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Tagged::Degenerate)
    }

    /// The real value, if the tag is `Real`.
    pub fn real(&self) -> Option<f64> {
        match self {
            Tagged::Real(v) => Some(*v),
            _ => None,
        }
    }

    /// Magnitude of the value regardless of tag; `None` when degenerate.
    pub fn magnitude(&self) -> Option<f64> {
        match self {
            Tagged::Real(v) | Tagged::Imaginary(v) => Some(crate::math::abs(*v)),
            Tagged::Degenerate => None,
        }
    }

    /// Two tagged values agree when the tags match and the payloads are
    /// within `tol` of each other.
    pub fn approx_eq(&self, other: &Tagged, tol: f64) -> bool {
        match (self, other) {
            (Tagged::Real(a), Tagged::Real(b)) | (Tagged::Imaginary(a), Tagged::Imaginary(b)) => {
                crate::math::abs(a - b) <= tol
            }
            (Tagged::Degenerate, Tagged::Degenerate) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tagged::Real(v) => write!(f, "{v}"),
            Tagged::Imaginary(v) => write!(f, "{v} i"),
            Tagged::Degenerate => write!(f, "degenerate"),
        }
    }
}

/// Builds a tagged value from `num / (scale * prod_k sqrt(factors_k))`.
///
/// Each negative factor contributes one power of `i` to the denominator;
/// an even count keeps the result real (with the sign of `i^2 = -1` per
/// pair), an odd count makes it imaginary. A factor below `eps` in
/// magnitude, or a vanishing scale, yields `Degenerate`.
pub(crate) fn from_sqrt_quotient(num: f64, scale: f64, factors: &[f64], eps: f64) -> Tagged {
    if crate::math::abs(scale) < eps {
        return Tagged::Degenerate;
    }
    let mut mag = crate::math::abs(scale);
    let mut negatives = 0u32;
    for &f in factors {
        if crate::math::abs(f) < eps {
            return Tagged::Degenerate;
        }
        if f < 0.0 {
            negatives += 1;
        }
        mag *= crate::math::sqrt(crate::math::abs(f));
    }
    let sign = if scale < 0.0 { -1.0 } else { 1.0 };
    let v = sign * num / mag;
    // 1/i = -i, 1/i^2 = -1, 1/i^3 = i
    match negatives % 4 {
        0 => Tagged::Real(v),
        1 => Tagged::Imaginary(-v),
        2 => Tagged::Real(-v),
        _ => Tagged::Imaginary(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_tags_follow_negative_factor_count() {
        let t = from_sqrt_quotient(1.0, 2.0, &[4.0], 1e-14);
        assert_eq!(t, Tagged::Real(0.25));
        let t = from_sqrt_quotient(1.0, 2.0, &[-4.0], 1e-14);
        assert_eq!(t, Tagged::Imaginary(-0.25));
        let t = from_sqrt_quotient(1.0, 2.0, &[-4.0, -1.0], 1e-14);
        assert_eq!(t, Tagged::Real(-0.25));
        let t = from_sqrt_quotient(1.0, 2.0, &[0.0], 1e-14);
        assert!(t.is_degenerate());
    }

    #[test]
    fn display_matches_physics_notation() {
        extern crate alloc;
        use alloc::format;
        assert_eq!(format!("{}", Tagged::Imaginary(-0.03)), "-0.03 i");
    }
}
