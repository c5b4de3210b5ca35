//! Conditional assessment of the two-stage Hausman-pretest confidence
//! interval for the slope in a correlated-random-effects panel model.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod mc;
pub mod numeric;
pub mod panel;
pub mod theory;

pub use error::{Error, Result};
