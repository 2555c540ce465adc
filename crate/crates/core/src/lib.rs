//! Design, simulation and stability analysis of fractional-order active
//! disturbance rejection controllers.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adrc;
pub mod analysis;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod fracnum;
pub mod plant;
pub mod polyroots;
pub mod report;
pub mod scenario;
pub mod stability;

pub use error::{Error, Result};
