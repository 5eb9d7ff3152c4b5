//! Fused depthwise/pointwise convolution kernels with configurable data
//! layouts, a scratchpad-hierarchy simulator with exact transfer accounting,
//! and a deployment planner that picks a fusion strategy per block.

pub mod bench;
pub mod error;
pub mod exec;
pub mod fused;
pub mod kernels;
pub mod memsim;
pub mod model;
pub mod net;
pub mod planner;
pub mod reference;
pub mod synth;

pub use error::{Error, Result};
