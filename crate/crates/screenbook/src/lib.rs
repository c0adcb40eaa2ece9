//! Dealer screening books with trader outside options.

// NaN-rejecting guards such as `!(x > 0.0)` are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod book;
pub mod cli;
pub mod config;
pub mod darkpool;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod presets;
pub mod screening;

pub use error::{Error, Result};
