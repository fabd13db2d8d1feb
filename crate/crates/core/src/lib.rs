//! Jet-based numerical verification of conformal curvature, tractor calculus
//! and Yang–Mills current identities.

pub mod catalog;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod fields;
pub mod gauge;
pub mod harness;
pub mod holography;
pub mod jet;
pub mod tractor;

pub use error::{Error, Result};
pub use fields::{Metric, Slot, Tensor};
pub use jet::Jet;
