//! Numeric abstraction shared by plain `f64` evaluation and the gradient tape.
//!
//! Model code (recognition network, kernel recursions, ELBO terms) is written
//! once against [`Scalar`]; running it with `f64` gives fast inference, running
//! it with [`Var`](crate::tape::Var) records a differentiable trace.

use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living in the same evaluation context as `self`.
    fn constant_like(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn recip(self) -> Self;
    /// `c / self`.
    fn rdiv(self, c: f64) -> Self;
    fn sqrt(self) -> Self;
    fn log_sigmoid(self) -> Self;
    fn gelu(self) -> Self;
    /// Clamp with a zero derivative outside `[lo, hi]`.
    fn clamp_to(self, lo: f64, hi: f64) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// Sum of `weights[i] * xs[i]` plus `bias`.
    fn affine(weights: &[Self], xs: &[Self], bias: Self) -> Self {
        weights.iter().zip(xs).fold(bias, |acc, (&w, &x)| acc + w * x)
    }
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn constant_like(self, c: f64) -> Self {
        c
    }
    #[inline]
    fn exp(self) -> Self {
        math::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        math::ln(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn rdiv(self, c: f64) -> Self {
        c / self
    }
    #[inline]
    fn sqrt(self) -> Self {
        math::sqrt(self)
    }
    #[inline]
    fn log_sigmoid(self) -> Self {
        math::log_sigmoid(self)
    }
    #[inline]
    fn gelu(self) -> Self {
        math::gelu(self)
    }
    #[inline]
    fn clamp_to(self, lo: f64, hi: f64) -> Self {
        if self < lo {
            lo
        } else if self > hi {
            hi
        } else {
            self
        }
    }
}
