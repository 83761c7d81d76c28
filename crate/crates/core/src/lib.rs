//! Numerical spectral geometry of singular Riemannian models.

// `!(a < b)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod discretize;
pub mod eig;
pub mod error;
pub mod geometry;
pub mod models;
pub mod svf;
pub mod weyl;

pub use error::{Error, Result};
