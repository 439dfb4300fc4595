//! FIR System Level Synthesis: synthesis programs, controller realizations,
//! and a simulated cyber layer for deploying them.
//!
//! `no_std` with `alloc`. File formats and the command-line front end live in
//! the companion `sls-deploy` crate.
#![no_std]
// `!(a > b)` is deliberate where NaN must fail the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[macro_use]
extern crate alloc;

pub mod error;
#[cfg(test)]
mod fixtures;
pub mod architectures;
pub mod cost;
pub mod cyber;
pub mod lti;
pub mod realizations;
pub mod simulate;
pub mod spectral;
pub mod stability;
pub mod synthesis;
pub mod trace;

pub use error::{Error, Result};
pub use lti::LtiSystem;
pub use spectral::SpectralSeries;
pub use trace::Trace;
