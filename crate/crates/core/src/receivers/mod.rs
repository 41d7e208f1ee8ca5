//! Channel estimators and symbol detectors.

pub mod block_inverse;
pub mod ce;
pub mod sd;
