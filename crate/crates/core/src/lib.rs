//! Perfect simulation of stationary determinantal point processes.
//!
//! Samples are drawn by dominated coupling from the past: a spatial
//! birth–death process with constant birth rate `H` dominates the target
//! chain, and lower and upper sandwich processes driven by the same events
//! and marks are run from ever earlier start times until they agree at time
//! zero.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cftp;
pub mod diagnostics;
pub mod dominating;
pub mod kernel;
pub mod oracle;
pub mod papangelou;

pub use kernel::{
    max_alpha, AlphaSpec, Family, KernelError, KernelSummary, ModelSpec, Point, SpectralKernel,
    Window,
};
