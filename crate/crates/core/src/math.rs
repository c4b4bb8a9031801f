// Scalar math routed through libm so results do not depend on whether the
// crate is built with or without std.

pub(crate) use libm::{atan2, cos, exp, expm1, fabs, log, log10, log1p, sin, sqrt, tanh};

pub(crate) const PI: f64 = core::f64::consts::PI;
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow for large |x|.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}
