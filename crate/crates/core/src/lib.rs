//! Shrinking-target statistics for the Teichmüller geodesic flow on
//! Teichmüller curves of square-tiled surfaces.

// `!(x > 0)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod flow;
pub mod hyperbolic;
pub mod orbit;
pub mod origami;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};

pub type HPointF64 = hyperbolic::HPoint<f64>;
pub type HPointF32 = hyperbolic::HPoint<f32>;
pub type MobiusF64 = hyperbolic::Mobius<f64>;
pub type MobiusF32 = hyperbolic::Mobius<f32>;
pub type QuotientPointF64 = hyperbolic::QuotientPoint<f64>;
pub type QuotientPointF32 = hyperbolic::QuotientPoint<f32>;
pub type CurveGeometryF64 = hyperbolic::CurveGeometry<f64>;
pub type CurveGeometryF32 = hyperbolic::CurveGeometry<f32>;
pub type CenterF64 = hyperbolic::Center<f64>;
pub type CenterF32 = hyperbolic::Center<f32>;
