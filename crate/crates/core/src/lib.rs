//! Core algorithms for GPS-denied inertial navigation with a learned
//! increment estimator.
//!
//! The crate is `no_std` (with `alloc`) and carries no IO. It covers:
//!
//! - [`log`]: the flight-log data model and validation,
//! - [`synth`]: synthetic flights with exact multi-rate sensor models,
//! - [`deadreckon`]: strapdown inertial propagation (the GPS-less baseline),
//! - [`preprocess`]: 5 Hz rate unification, differencing, trimming, windowing,
//! - [`rnn`]: a recurrent regressor with hand-written backpropagation,
//! - [`train`]: the training loop with learning-rate schedule and warm starts,
//! - [`metrics`]: path reconstruction and drift metrics,
//! - [`online`]: the causal streaming counterpart of preprocessing + inference.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod deadreckon;
pub mod error;
pub mod log;
pub mod metrics;
pub mod model;
pub mod online;
pub mod preprocess;
pub mod rnn;
pub mod spline;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
