//! Bit-exact inference for ternary-input binary-weight convolutional
//! networks, together with a cycle-level cost model of a sparsity-aware
//! accelerator built around XOR multiply-accumulate lanes.
//!
//! The crate covers the whole pipeline: spatial-difference encoding of
//! grayscale frames into ternary activations, the sparse map/value
//! activation encoding and its packed memory images, a reference ("golden")
//! network evaluator, the accelerator simulator with zero-skipping and
//! workload reordering, and the metrics used to report size, cycle, and
//! figure-of-merit numbers.

pub mod bits;
pub mod cifar;
pub mod dvs;
pub mod error;
pub mod format;
pub mod golden;
pub mod memory;
pub mod metrics;
pub mod network;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
