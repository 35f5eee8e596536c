// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod domination;
pub mod error;
pub mod estimators;
pub mod loss_estimators;
pub mod model_selection;
pub mod risk_engine;
pub mod samplers;

pub use error::{Error, Result};
