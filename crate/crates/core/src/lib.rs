//! Single-sample secretary problems and the two-sided Game of Googol.
//!
//! * [`model`]: instances, orientations, arrival times, seeded substreams.
//! * [`rank`]: exact rank-beat probabilities and their verifiers.
//! * [`bound`]: block integrals, the 0.5007 lower bound, optimal thresholds, γ.
//! * [`policies`]: block-rank, the max-face-up threshold rule, exact evaluators.
//! * [`last_success`]: the single-sample last-success problem.
//! * [`sim`]: Monte Carlo harness and superstar statistics.

pub mod bound;
pub mod error;
pub mod last_success;
pub mod model;
pub mod policies;
pub mod quad;
pub mod rank;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
