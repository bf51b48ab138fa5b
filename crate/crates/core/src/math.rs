//! Elementary functions routed through `libm` so the crate stays `no_std`.

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// `p ln p` with the convention `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * ln(p)
    } else {
        0.0
    }
}

pub(crate) const LN_2: f64 = core::f64::consts::LN_2;
