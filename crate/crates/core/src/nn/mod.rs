//! Small fixed-architecture neural networks in `f64` with exact gradients.
//!
//! Only the family needed by the placement agent is supported: an optional
//! LSTM over the observation history, a rectified dense trunk, and a linear
//! output split into per-head advantages and values.

pub mod dueling;
mod gradcheck;
mod layers;
mod network;
mod optim;
mod sparse;

pub use gradcheck::{check_gradients, GradCheck};
pub use layers::{Dense, Lstm, LstmTrace};
pub use network::{ForwardCache, NetworkSpec, QNetwork};
pub use optim::{sgd_update, Optimizer, OptimizerKind};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}
