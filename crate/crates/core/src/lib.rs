//! Weekly ledger-graph topology and market features, an LSTM forecaster of
//! next-week price increments, and exact Shapley feature attribution.
//!
//! The pipeline runs: transaction ingest -> weekly graphs -> decile filtration
//! Betti sequences and motif censuses -> feature matrix -> walk-forward LSTM ->
//! correlation, attribution and ablation reports. A seeded synthetic-data
//! generator with a planted topology-to-price coupling backs the end-to-end
//! tests.

pub mod attribution;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod gf2;
pub mod graph;
pub mod homology;
pub mod ingest;
pub mod lstm;
pub mod market;
pub mod motifs;
pub mod pipeline;
pub mod quantile;
pub mod synth;
pub mod topo;
pub mod unionfind;

pub use error::{Error, Result};
