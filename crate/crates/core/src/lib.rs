//! Design-based predictive inference for finite-population surveys.
//!
//! Prediction estimators of population totals with design-unbiased bias and
//! MSE estimation through subsampling Rao-Blackwellisation, together with the
//! production applications built on the same machinery: selective editing
//! scores, early estimates from partially collected panels, selection of
//! units for administrative reporting, and weekly disaggregation of a
//! quarterly sampling design.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command line and parallel replicate runners live in the `dbpi` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod adminframe;
pub mod combinatorics;
pub mod designs;
pub mod earlyest;
pub mod editing;
pub mod efficiency;
mod error;
pub mod linalg;
pub mod math;
pub mod popframe;
pub mod predictors;
pub mod rng;
pub mod srb;
pub mod timedisagg;

pub use error::{Error, ErrorClass, Result};
