//! A spectral laboratory for Boussinesq-Peregrine type dispersive
//! shallow-water models over nonflat bottoms on periodic domains.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bathymetry;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod operators;
pub mod scenarios;
pub mod spectral;
pub mod timeloop;
pub mod verification;

pub use error::{Error, Result};
