//! Per-measurement anomaly detection for wireless link RSSI traces.
//!
//! A trace is turned into a graph whose nodes are the individual
//! measurements and whose weighted, directed edges come from the trace's
//! Markov transition field. A three-block graph attention network then
//! scores every node, so anomalies are both detected and localized.
//!
//! The numerical core ([`tensor`], [`mtf`], [`gat`], [`train`]) is generic
//! over the floating point type through [`Scalar`]; the aliases below pin
//! the `f64` instantiation used by the command-line pipeline.

pub mod error;
pub mod gat;
pub mod inject;
pub mod metrics;
pub mod mtf;
pub mod scalar;
pub mod seed;
pub mod tensor;
pub mod trace;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense tensor over `f64`.
pub type Tensor64 = tensor::Tensor<f64>;
/// Autodiff tape over `f64`.
pub type Tape64 = tensor::Tape<f64>;
/// Transition field over `f64`.
pub type TransitionField64 = mtf::TransitionField<f64>;
/// Trace graph over `f64`.
pub type TsGraph64 = mtf::TsGraph<f64>;
/// Attention model over `f64`.
pub type GatModel64 = gat::GatModel<f64>;
/// Attention model over `f32`.
pub type GatModel32 = gat::GatModel<f32>;
