//! Simulation, coincidence counting and accidental correction for heralded
//! single-photon sources.
//!
//! - [`sim`] generates pair events and per-arm detection streams with loss,
//!   jitter, background and dead-time.
//! - [`coincidence`] reproduces pulse-overlap coincidence logic, delay scans
//!   and raw heralding ratios.
//! - [`correction`] holds the accidental/dead-time rate model and its
//!   inverse, with uncertainty propagation.
//! - [`trace`] synthesizes detector traces and discriminates them.
//! - [`bell`] computes CHSH statistics.
//! - [`pipeline`] closes the loop from simulated truth to corrected estimate.

pub mod bell;
pub mod cli;
pub mod coincidence;
pub mod correction;
pub mod error;
pub mod fit;
mod linalg;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stream;
pub mod trace;

pub use coincidence::{CoincidenceConfig, CountsSummary, DelayScan};
pub use correction::{CorrectedEstimate, WindowParams};
pub use error::{Error, Result};
pub use sim::SourceModel;
pub use stream::{Channel, EventStream};
