//! Statistical post-processing of discrete visibility ensemble forecasts.
//!
//! Visibility is forecast on the 84-value WMO reporting scale. The crate
//! provides the scale itself, data loading and a synthetic generator, feature
//! extraction, two calibration models (proportional-odds logistic regression
//! and a small multilayer perceptron), rolling-window training under three
//! spatial pooling schemes, and verification of the resulting predictive
//! distributions.

pub mod data;
pub mod error;
pub mod features;
pub mod mlp;
pub mod polr;
pub mod rng;
pub mod scale;
pub mod training;
pub mod verification;

mod optim;

pub use error::{Error, Result};
pub use scale::{ClassIndex, N_CLASSES};
