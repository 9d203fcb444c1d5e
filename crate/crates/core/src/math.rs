//! Scalar transcendental functions for `no_std` builds, backed by `libm`.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
/// 1/sqrt(2*pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Logistic sigmoid, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without cancellation for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -ln_1p(exp(-x))
    } else {
        x - ln_1p(exp(x))
    }
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x * FRAC_1_SQRT_2))
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

/// Exact (erf-based) GELU.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * norm_cdf(x)
}

/// Log-density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -0.5 * (LN_2PI + ln(var) + z * z / var)
}

/// `KL(N(m1, v1) || N(m0, v0))`.
#[inline]
pub fn gaussian_kl(m1: f64, v1: f64, m0: f64, v0: f64) -> f64 {
    let dm = m1 - m0;
    0.5 * (ln(v0 / v1) + (v1 + dm * dm) / v0 - 1.0)
}
