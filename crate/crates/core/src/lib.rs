//! Design-based estimation of average treatment effects with leave-one-out
//! ridge regression adjustment.
//!
//! The two adjusted estimators, [`estimators::estimate_loora_ht`] for simple
//! random assignment and [`estimators::estimate_loora_dm`] for complete random
//! assignment, fit the adjustment for each unit without that unit's outcome.
//! They are exactly unbiased for the finite-population effect, and their
//! variances have closed forms in [`oracle`] that are checked against full
//! enumeration of the assignment distribution.

pub mod design;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod simulation;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
