//! Graph neural network building blocks: B-spline kernels, spline
//! convolution, batch normalization, and the scalar abstraction shared by
//! the f64 training path and the f32 inference path.

pub mod bspline;
pub mod conv;
pub mod norm;
pub mod scalar;

pub use bspline::{cox_de_boor, SplineBasis};
pub use conv::{ConvCache, ConvGrads, SplineConv};
pub use norm::{BatchNorm, BatchStats, NormCache, NormGrads, BN_EPS, BN_MOMENTUM};
pub use scalar::{quantize_f32, Scalar};
