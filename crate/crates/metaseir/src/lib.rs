//! Toolkit for estimating time-varying local and mobility-induced
//! transmission rates of a metapopulation SEIR model from regional case
//! counts and commuter mobility, and for producing validated short-term
//! regional forecasts with uncertainty bands.
//!
//! The pipeline is organized as:
//!
//! 1. [`ingest`] — parse and validate regions, case counts, commuter
//!    baselines, mobility reductions, and national prevalence.
//! 2. [`state_init`] — reconstruct the six compartments per region on any
//!    date from reported cases.
//! 3. [`dynamics`] — step the discrete-time coupled SEIR system and compute
//!    the effective reproduction number via the next-generation matrix.
//! 4. [`estimation`] — per-day maximum likelihood fits of the transmission
//!    rates under Poisson or negative-binomial observation models, with
//!    parametric bootstrap confidence intervals and AIC comparison.
//! 5. [`forecast`] — 14-day-ahead forecasts with scenario bands, plus
//!    RMSE / Spearman / delay-scan evaluation.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod ingest;
pub mod linalg;
pub mod state_init;

pub use error::{Error, Result};
