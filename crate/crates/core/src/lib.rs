//! Probabilistic forecasting for collections of related time series.
//!
//! Each series is modelled as a global fixed effect, a per-series linear
//! combination of latent factors produced by a shared LSTM, plus a local
//! random effect drawn from a Gaussian process with an RBF kernel. Training
//! maximises the exact Gaussian marginal likelihood; forecasts are Gaussian
//! per step, summarised by mean, variance and quantiles.

pub mod data;
pub mod error;
pub mod factors;
pub mod gp;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
