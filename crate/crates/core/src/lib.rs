//! OTFS receiver lab.
//!
//! Zero-padded OTFS frames over sparse delay-Doppler channels, embedded-pilot
//! channel estimation and data detection with plug-and-play ADMM (learned
//! denoisers inside an ADMM loop), classical baselines, a small neural-network
//! kit for training the denoisers, and a Monte-Carlo harness.

pub mod channel;
pub mod denoise;
pub mod error;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod pilot;
pub mod persist;
pub mod pnp;
pub mod receivers;

pub use error::{Error, Result};
