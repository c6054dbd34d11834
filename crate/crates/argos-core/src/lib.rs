//! Detection pipeline for rogue base stations in mobile radio networks.
//!
//! The crate simulates per-UE radio telemetry, ships it over a compact
//! binary E2-style transport, encodes it into fixed-width per-second
//! feature vectors, and scores those vectors with unsupervised anomaly
//! models (autoencoder variants and an isolation forest) inside a
//! monitoring engine that retrains itself on live traffic.

pub mod cli;
pub mod codec;
pub mod e2node;
pub mod eval;
pub mod models;
pub mod sim;
pub mod types;
pub mod xapp;

pub use cli::run;

pub use types::{
    build_registry, encode_second, normalize_measurement, registry_from_measurements,
    CellIdentity, CellMeasurement, CellRegistry, MeasurementReport, Rat, ReportSource,
    TelemetryVector, TypeError,
};
