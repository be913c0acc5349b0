//! Computational dual Brunn-Minkowski geometry on finite sphere partitions.
//!
//! The crate models star sets through their radial functions, computes dual
//! mixed volumes exactly on polycones and grid-sampled bodies (Monte Carlo
//! for sampler-backed bodies), realizes positive multilinear functionals as
//! sparse kernel measures over grid-cell tuples, and provides the property
//! checkers and measure-recovery pipeline that decide whether a black-box
//! functional is a constant multiple of the dual mixed volume.

pub mod characterize;
pub mod dmv;
pub mod functionals;
pub mod error;
pub mod json;
pub mod numeric;
pub mod sampling;
pub mod sphere;
pub mod starset;

pub use error::{DmvError, Result};
