//! Payment-network analytics: network construction, topology and risk
//! statistics, community and hierarchy inference, and rating prediction.

pub mod classify;
pub mod cli;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod partition;
pub mod rating;
pub mod riskstats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::PaymentGraph;
pub use rating::{FirmMeta, Rating, Risk, Status};
