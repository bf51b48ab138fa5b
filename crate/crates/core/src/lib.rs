//! Convolutional arithmetic circuits (ConvACs) as exactly computable
//! discrete probabilistic models.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, CP and hierarchical Tucker (HT) factor
//!   containers with exact reconstruction.
//! * [`info`]: Shannon quantities on finite distributions, and differential
//!   entropy of one-dimensional densities under monotone maps.
//! * [`model`]: the shallow CP-model and the deep HT-model over a finite
//!   alphabet, with factored forward evaluation and enumeration oracles.
//! * [`scaling`]: per-mapping entropy gaps, the constants `C` and `beta`,
//!   and the additive / multiplicative information scaling bounds.
//!
//! All entropies are in nats unless a [`info::LogBase`] says otherwise.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod info;
pub mod model;
pub mod rng;
pub mod scaling;
pub mod tensor;

pub use error::{Error, Result};
