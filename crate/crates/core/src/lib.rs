// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

pub mod detect;
pub mod error;
pub mod harness;
pub mod inference;
pub mod multiplicity;
pub mod normal;
pub mod projection;
pub mod rng;
pub mod selection;
pub mod series;

pub use error::{Error, Result};
