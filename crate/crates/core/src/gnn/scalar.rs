//! Floating-point abstraction for the network.
//!
//! Training runs in `f64` so finite-difference gradient checks are
//! meaningful; the latency-critical inference path instantiates the same
//! code at `f32`. Parameters are kept on the `f32` grid either way, so the
//! two representations describe the same network.

use ndarray::LinalgScalar;

pub trait Scalar: LinalgScalar + PartialOrd + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn exp(self) -> Self {
        f32::exp(self)
    }

    fn ln(self) -> Self {
        f32::ln(self)
    }
}

/// Round to the nearest `f32`-representable value while staying in `f64`.
pub fn quantize_f32(v: f64) -> f64 {
    v as f32 as f64
}
