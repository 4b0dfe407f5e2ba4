//! Decomposition toolkit for the urban wage growth premium on matched
//! employer-employee two-period panels: panel ingestion and preparation,
//! a linear-time coworker-statistics kernel, high-dimensional fixed-effects
//! estimation with cluster-robust inference, second-stage city-size
//! projections, job-mobility regressions, and a synthetic panel generator
//! with planted ground truth for end-to-end verification.

pub mod decomp;
pub mod error;
pub mod kernel;
pub mod mobility;
pub mod panel;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod synth;
pub mod verify;

pub use error::{Error, ErrorCategory, Result};

/// Library version, echoed into run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
