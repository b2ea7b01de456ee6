//! Hybrid message-passing multi-user detection for uplink grant-free NOMA.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: log-domain Gaussian densities, the digamma surrogate and
//!   Beta log-expectations.
//! - [`model`]: synthetic instance generation for the linear model
//!   `Y = H B + W` with Markov-correlated user activity.
//! - [`gamp`]: per-slot sum-product GAMP with an AWGN output channel.
//! - [`bgmc`]: the Bernoulli-Gaussian Markov-chain prior messages and the
//!   conjugate Beta/Gamma hyperparameter updates.
//! - [`detectors`]: GAMP-BG-MC and the SBL, PCSBL and genie baselines.
//! - [`harness`]: Monte Carlo SER experiments with deterministic seeding.
//! - [`oracle`]: brute-force reference computations used for verification.

pub mod bgmc;
pub mod checks;
pub mod detectors;
pub mod error;
pub mod gamp;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
pub use num_complex::Complex64;
