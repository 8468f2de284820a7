//! Asymmetric link-prediction training engine.
//!
//! Learns link scores on a graph with an asymmetric pair of encoders: a
//! sampled message-passing path for one endpoint and a structure-pre-encoded
//! MLP path (with weight sharing and a residual branch) for the other.
//! Mini-batches are formed row-wise so each message-passing representation is
//! computed once per epoch, and per-epoch cost counters make the resulting
//! complexity separation measurable.

pub mod cli;
pub mod cost;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod sampler;
pub mod seed;
pub mod train;

pub use error::CoreError;
