//! Proprioception-to-vision pipeline for a simulated soft octopus arm.
//!
//! The crate covers the whole chain:
//!
//! 1. [`physics`] — deterministic 2D mass-spring-damper simulation of the arm,
//!    driven at the top edge by a product of sinusoids.
//! 2. [`sensing`] — stretch sensors spanning node pairs, sampled along a trajectory.
//! 3. [`raster`] — binary 84×52 silhouette frames rendered from body states.
//! 4. [`nn`] — from-scratch tensor kernels (conv, transposed conv, dense, LSTM,
//!    binary cross-entropy, Adam) with exact analytical gradients and a
//!    finite-difference gradient checker.
//! 5. [`models`] — the stacked convolutional autoencoder and the sensor-to-latent
//!    LSTM, plus the imagination path (sensors → latent → decoded frame).
//! 6. [`pipeline`] — dataset assembly, normalization, feature masking, training
//!    loops and evaluation metrics.
//! 7. [`cli`] — staged command-line driver with a run manifest.
//!
//! Every stage is deterministic for a fixed seed and configuration. See the
//! `examples/` directory for one runnable program per capability; the `softarm`
//! binary chains the stages (`simulate`, `render`, `train-ae`, `train-rnn`,
//! `imagine`, `eval`, `run-all`).

pub mod cli;
mod error;
mod ioutil;
pub mod models;
pub mod nn;
pub mod physics;
pub mod pipeline;
pub mod raster;
pub mod sensing;
pub mod vec2;

pub use error::{Error, Result};
