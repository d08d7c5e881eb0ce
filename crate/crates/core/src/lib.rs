// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod constants;
pub mod dataset;
pub mod degradation;
pub mod electrochem;
pub mod error;
pub mod network;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
