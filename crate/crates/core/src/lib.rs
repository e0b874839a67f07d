//! Analysis of software-router load sweeps.
//!
//! A campaign measures packet loss at a grid of offered loads, with several
//! runs per load. This crate aggregates the runs into per-load statistics
//! ([`metrics`]), locates the Partial Drop Rate and checks whether it sits at
//! the onset of saturation ([`saturation`]), reads and writes campaign
//! directories ([`ingest`]), renders reports ([`report`]) and generates
//! synthetic campaigns from closed-form load-loss models ([`curve`]).

pub mod cli;
pub mod curve;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod saturation;

pub use error::{Error, Result};
