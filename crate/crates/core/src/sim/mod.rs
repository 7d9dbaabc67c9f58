//! Deterministic discrete-event simulator. A single seed drives the
//! pacemaker jitter, network delays and randomized adversary choices, each
//! from its own ChaCha stream, so identical configurations give
//! byte-identical traces.

pub mod config;
mod engine;
pub mod network;
pub mod trace;

use thiserror::Error;

pub use config::{
    AdversaryAction, ConfigError, CrashEntry, ExecutionConfig, FaultSchedule, LinkDelay, Time, DEFAULT_DELTA,
    FORMAT_VERSION,
};
pub use network::delay_model;
pub use trace::{Event, Trace, TraceError};

use crate::lbr::EnvelopeError;
use crate::node::NodeError;
use crate::types::StoreError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("adversary envelope violated: {0}")]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Node(#[from] NodeError),
}

/// Run one execution to its horizon and return the full event trace.
pub fn run(config: &ExecutionConfig) -> Result<Trace, SimError> {
    engine::Engine::new(config)?.run()
}
