//! Prediction intervals for time series built from an ensemble of point
//! forecasts.
//!
//! The pipeline has two stages. A rolling-window linear quantile regression
//! ([`qr`]) turns the ensemble into an unconformalized interval per step,
//! optionally using the ensemble dispersion as a regressor (HQR). An online
//! conformal layer ([`conformal`]) then recalibrates those intervals, either
//! with a single adaptive miscoverage (ACI) or with one miscoverage per
//! interval-length bucket (WACI). [`metrics`] scores the result and
//! [`synth`] reproduces the two-regime synthetic benchmark.

pub mod config;
pub mod conformal;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipelines;
pub mod qr;
pub mod seed;
pub mod series;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use series::{ForecastPanel, Interval, IntervalKind, IntervalRecord, IntervalStream};
