//! Leader-aware state machine replication with Carousel reputation-based
//! leader rotation.
//!
//! The crate contains the block and store model ([`types`]), one
//! leader-based round of propose/endorse/certify ([`lbr`]), round
//! synchronization ([`pacemaker`]), leader election ([`election`]), the
//! per-party commit loop ([`node`]), a deterministic discrete-event
//! simulator ([`sim`]), trace verifiers ([`verify`]) and seed sweeps
//! ([`experiment`]).

pub mod election;
pub mod experiment;
pub mod lbr;
pub mod node;
pub mod pacemaker;
pub mod sim;
pub mod types;
pub mod verify;

pub use election::{ElectorConfig, LeaderElector, PickRule, Strategy};
pub use sim::{run, ExecutionConfig, SimError, Trace};
pub use types::{Block, BlockId, BlockStore, PartyId, RoundNumber};
pub use verify::{verify, Verdict, VerificationReport};
