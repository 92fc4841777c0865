//! Virtual synchronous generator lab: grid plant, swing equation, voltage
//! controllers (PI droop, tuned PI, neural predictive control) and a
//! simulation harness that compares them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod harness;
pub mod nn;
pub mod npc;
pub mod voltage;
pub mod vsg;

pub use error::{Error, Result};
