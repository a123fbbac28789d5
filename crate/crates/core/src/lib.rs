// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closedform;
pub mod ensemble;
pub mod error;
pub mod fidelity;
pub mod linops;
pub mod povm;
pub mod spinboson;

pub use error::{Error, Result};
