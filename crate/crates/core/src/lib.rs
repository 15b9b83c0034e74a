//! Feedback cooling of thermal mechanical resonator modes with a
//! reinforcement-learned policy.
//!
//! * [`dynamics`]: Langevin equations of motion, thermal initial states.
//! * [`actuation`]: action levels, cavity field, forces and frequency shifts,
//!   observations.
//! * [`policy`]: dense softmax network, log-probability gradients, Adam.
//! * [`reinforce`]: rewards, rollouts, the batch gradient estimator and the
//!   training loop.
//! * [`harness`]: experiment presets, checkpoints, CSV output and the runs
//!   behind the command-line tool.

pub mod actuation;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod policy;
pub mod reinforce;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
