//! Certified fixed-point iteration.
//!
//! The crate certifies a contraction modulus `κ < 1` for a fixed-point map
//! from verifiable model data (kernel bounds, Lipschitz constants, an
//! invariant ball), runs Picard iteration with a priori and residual error
//! certificates attached to every step, and quantifies how fixed points move
//! under perturbations of the map or inexact evaluation.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double-precision instantiation.

// Validation is written as `!(x > 0)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod funcspace;
pub mod gauge;
pub mod operators;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Interval64 = funcspace::Interval<f64>;
pub type Grid64 = funcspace::Grid<f64>;
pub type GridFunction64 = funcspace::GridFunction<f64>;
pub type BallRegion64 = funcspace::BallRegion<f64>;
pub type Gauge64 = gauge::Gauge<f64>;
pub type CertifiedModulus64 = gauge::CertifiedModulus<f64>;
pub type Operator64 = operators::FixedPointOperator<f64>;
pub type DataPacket64 = operators::DataPacket<f64>;
pub type IterationTrace64 = engine::IterationTrace<f64>;
pub type PerturbationReport64 = stability::PerturbationReport<f64>;

pub type Interval32 = funcspace::Interval<f32>;
pub type Grid32 = funcspace::Grid<f32>;
pub type GridFunction32 = funcspace::GridFunction<f32>;
pub type Gauge32 = gauge::Gauge<f32>;
pub type Operator32 = operators::FixedPointOperator<f32>;
pub type DataPacket32 = operators::DataPacket<f32>;
