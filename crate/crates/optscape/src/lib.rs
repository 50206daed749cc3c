//! A deterministic laboratory for studying how stochastic-gradient optimizers
//! move through the loss landscape of small batch-normalized networks.
//!
//! The pieces:
//!
//! - [`tensor`]: dense f64 tensors and layer primitives with exact
//!   reverse-mode gradients.
//! - [`model`]: fully connected networks, initialization schemes, and the
//!   flat [`model::ParameterVector`] that all weight-space arithmetic uses.
//! - [`optim`]: SGD, SGDM, Adagrad, RMSprop, Adadelta, and Adam expressed as
//!   vector fields consumed by a fixed-step explicit Euler update, plus a
//!   two-stage Runge-Kutta gradient augmentation and optimizer-switch
//!   schedules.
//! - [`landscape`]: linear/bilinear/barycentric interpolation between
//!   checkpoints, batch-norm statistic refresh at interpolated points, and
//!   loss-surface grids and basin profiles.
//! - [`analysis`]: functional distance, prediction disagreement, and
//!   loss-barrier statistics between solutions.
//! - [`rng`]: counter-based random streams so runs can share or vary their
//!   randomness independently.
//! - [`data`], [`config`], [`checkpoint`], [`emit`], [`recipes`]: dataset
//!   ingestion (IDX and synthetic), run configuration, bit-exact checkpoint
//!   persistence, delimited-text result emission, and canned end-to-end
//!   experiments.
//!
//! Every run is a pure function of its configuration: no time-based seeding,
//! no hidden global state. Repeating a run yields byte-identical outputs.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod emit;
pub mod error;
pub mod landscape;
pub mod model;
pub mod optim;
pub mod recipes;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
