//! Per-sequence VMAF bitrate ladders at a fraction of the encoding cost.
//!
//! The toolkit builds the exhaustive reference ladder from full QP sweeps
//! and estimates it with three reduced-encode methods: naive interpolation
//! (NIL), knee-guided content-driven interpolation (CIL), and
//! feature-predicted cross-over ladders (FL). Evaluation covers BD-Rate,
//! RL-hits, and encode accounting, with a synthetic corpus generator for
//! desk-scale verification and Gaussian-process regressors for the
//! content-feature predictions.

pub mod backend;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod features;
pub mod gp;
pub mod interp;
pub mod kneedle;
pub mod ladder;
pub mod model;
pub mod pareto;

pub use error::{Error, Result};
