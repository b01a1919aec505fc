//! Scalar math shims: inherent `f64` methods under `std`, libm otherwise.

#![allow(dead_code)]

macro_rules! shim {
    ($(fn $name:ident($($arg:ident),+) -> f64 = $libm:ident;)*) => {
        $(
            #[inline]
            pub(crate) fn $name($($arg: f64),+) -> f64 {
                #[cfg(feature = "std")]
                {
                    f64::$name($($arg),+)
                }
                #[cfg(not(feature = "std"))]
                {
                    libm::$libm($($arg),+)
                }
            }
        )*
    };
}

shim! {
    fn sqrt(x) -> f64 = sqrt;
    fn sin(x) -> f64 = sin;
    fn cos(x) -> f64 = cos;
    fn tan(x) -> f64 = tan;
    fn acos(x) -> f64 = acos;
    fn atan2(y, x) -> f64 = atan2;
    fn abs(x) -> f64 = fabs;
    fn hypot(x, y) -> f64 = hypot;
    fn floor(x) -> f64 = floor;
}

#[inline]
pub(crate) fn sq(x: f64) -> f64 {
    x * x
}

/// Wraps an angle into `[0, 2*pi)`.
pub(crate) fn wrap_2pi(x: f64) -> f64 {
    let tau = 2.0 * core::f64::consts::PI;
    let r = x - tau * floor(x / tau);
    if r >= tau {
        r - tau
    } else {
        r
    }
}

/// Clamps to `[-1, 1]` so that `acos` never sees a rounding overshoot.
#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}
