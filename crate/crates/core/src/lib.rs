//! Federated learning treated as a three-objective minimization problem
//! (global error, communication overhead, privacy budget), searched with a
//! clustering-based evolutionary algorithm and compared against NSGA-II.
//!
//! The crate is organized bottom-up:
//!
//! * [`nn`]: a small dense network trained by clients.
//! * [`compression`]: pruning, quantization, clip-and-noise, and the
//!   communication and privacy objectives.
//! * [`federated`]: rounds, FedAvg and objective evaluation.
//! * [`evolution`]: genes, variation, clustering and survival.
//! * [`metrics`]: dominance, normalization, hypervolume.
//! * [`harness`]: configuration, datasets, the generation loop and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compression;
pub mod error;
pub mod evolution;
pub mod federated;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use compression::{CompressionParams, PrivacyAccountant, QBits};
pub use error::{Error, ErrorKind, Result};
pub use evolution::{Population, Solution};
pub use harness::{ExperimentConfig, RunRecord};
pub use metrics::{NormalizationBounds, ObjectiveVector};
pub use nn::{Dataset, ModelWeights};
