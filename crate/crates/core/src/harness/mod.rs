//! Monte-Carlo experiment harness.

pub mod config;
pub mod metrics;
pub mod seeds;
pub mod sim;
pub mod sweep;
pub mod train;
