//! Crash-count modeling toolkit.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`] parses crash and daily weather CSVs and fuses them into a
//!    complete, zero-filled (date, hour) observation grid.
//! 2. [`features`] encodes the grid into a design matrix (reference-cell or
//!    full dummy coding) and performs deterministic train/test splits.
//! 3. [`glm`] fits Poisson and NB2 log-link regressions by IRLS, tests for
//!    overdispersion and produces Wald inference.
//! 4. [`forest`] fits a bagged CART regression forest for comparison.
//! 5. [`advisor`] turns a fitted model into coefficient summaries and
//!    ranked commute slots; [`artifact`] persists models.
//!
//! [`synth`] generates calibrated synthetic inputs for demos and tests.

pub mod advisor;
pub mod artifact;
pub mod error;
pub mod features;
pub mod forest;
pub mod glm;
pub mod ingest;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
