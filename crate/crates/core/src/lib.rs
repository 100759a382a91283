//! Divergence (inverse time-to-contact) estimation from event-camera streams
//! recorded during ventral descent onto a fronto-parallel surface.
//!
//! Each batch of events is motion-compensated with a one-parameter radial
//! warp, and the warp parameter that maximises the contrast of the resulting
//! event image is found exactly by best-first branch and bound over the
//! admissible velocity interval. The crate also ships the tooling needed to
//! certify that estimator: a brute-force grid oracle, a synthetic landing
//! simulator with analytic ground truth, and error metrics.
//!
//! Module map:
//!
//! * [`events`]: event types, file formats, preprocessing and batching.
//! * [`geometry`]: the radial warp, the velocity domain and divergence retrieval.
//! * [`contrast`]: motion-compensated images, contrast and its interval upper bound.
//! * [`solver`]: branch and bound, the grid-search oracle and the stream driver.
//! * [`simulator`]: synthetic ventral-landing events with exact ground truth.
//! * [`evaluation`]: optic-flow to divergence conversion and error reports.

pub mod contrast;
pub mod error;
pub mod evaluation;
pub mod events;
pub mod geometry;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
