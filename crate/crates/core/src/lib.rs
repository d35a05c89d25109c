//! Fingerprint image quality from symmetry features, and quality-aware
//! multi-expert score fusion.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases at the crate root fix it to `f64` for everyday use.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod field;
pub mod filter;
pub mod fusion;
pub mod io;
pub mod quality;
pub mod scalar;
pub mod symmetry;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type GrayImage = field::Image<f64>;
pub type GrayImageF32 = field::Image<f32>;
pub type ComplexField = field::ComplexField<f64>;
pub type RealField = field::RealField<f64>;
pub type FilterBank = symmetry::FilterBank<f64>;
pub type QualityConfig = quality::QualityConfig<f64>;
pub type QualityReport = quality::QualityReport<f64>;
pub type TrainedSupervisor = fusion::TrainedSupervisor<f64>;
pub type ExpertScore = fusion::ExpertScore<f64>;
pub type FusionParams = fusion::FusionParams<f64>;
