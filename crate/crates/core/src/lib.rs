//! Reject inference for credit-acceptance scoring.
//!
//! Scorecards are fitted on selection-biased samples (only accepted applicants
//! have an observed outcome), corrected with one of five classical
//! reject-inference techniques, and compared at an operating acceptance rate
//! using the default rate among accepted applicants.
//!
//! Conventions: `outcome = 1` means the loan was repaid, `outcome = 0` means
//! default. A score estimates the probability of no default, and an applicant
//! is accepted when `score >= threshold`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod reject_inference;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};
