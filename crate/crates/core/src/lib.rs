//! Extremal sampling design.
//!
//! Simulation of log-Gaussian generalized r-Pareto processes, peaks-over-threshold
//! fitting of marginal and dependence models, and greedy sequential placement
//! of monitoring stations that best preserve exceedance probabilities of a
//! risk functional.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod samples;
pub mod simulate;
pub mod synthetic;
pub mod variogram;

pub use error::{Error, Result};
