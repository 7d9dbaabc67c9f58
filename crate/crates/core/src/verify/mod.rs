//! Trace verifiers. Every check is a pure function over a finished trace
//! and yields a [`Verdict`]; failures carry the indices of the events that
//! witness the violation.

pub mod fixtures;
mod index;
mod lbr;
mod metrics;
mod smr;
mod structure;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::config::FORMAT_VERSION;
use crate::sim::trace::Trace;
use crate::types::RoundNumber;

pub use index::TraceIndex;
pub use metrics::{queue_latency, DEFAULT_OFFERED_LOAD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { events: Vec<usize>, detail: String },
    NotApplicable { reason: String },
}

impl Verdict {
    /// A failure must point at concrete events; callers pass the best
    /// witnesses they have and `fallback` when the list would be empty.
    pub(crate) fn fail(mut events: Vec<usize>, fallback: usize, detail: impl Into<String>) -> Verdict {
        if events.is_empty() {
            events.push(fallback);
        }
        events.sort_unstable();
        events.dedup();
        Verdict::Fail { events, detail: detail.into() }
    }

    pub(crate) fn na(reason: impl Into<String>) -> Verdict {
        Verdict::NotApplicable { reason: reason.into() }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// First round whose notifications all come at or after GST.
    pub gst_round: Option<RoundNumber>,
    pub horizon: RoundNumber,
    pub skipped_round_count: u64,
    pub skipped_per_epoch: Vec<u64>,
    /// One more than the longest post-GST run of rounds with no committed
    /// honest block: the shortest window length that always holds one.
    pub chain_quality_worst_window: u64,
    pub honest_block_ratio: f64,
    pub committed_blocks: usize,
    pub steady_state_start: Option<RoundNumber>,
    pub commits_per_round: f64,
    /// Mean FIFO queueing latency at the configured offered load.
    pub latency_in_rounds: f64,
    /// Offered transactions still queued at the horizon.
    pub censored_transactions: f64,
    /// Mean wait from a round's start to the first commit of a block of that
    /// round or later (load independent).
    pub slot_latency_in_rounds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub format_version: u32,
    pub verdicts: BTreeMap<String, Verdict>,
    pub metrics: Metrics,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.values().any(Verdict::is_fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &Verdict)> {
        self.verdicts.iter().filter(|(_, v)| v.is_fail()).map(|(k, v)| (k.as_str(), v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Liveness window in rounds; `None` means `5f+2`.
    pub liveness_window: Option<u64>,
    /// Offered load as a fraction of block capacity.
    pub offered_load: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { liveness_window: None, offered_load: DEFAULT_OFFERED_LOAD }
    }
}

/// `5f+2`: the window within which an honest block must commit, used by
/// both chain quality and the default liveness check.
pub fn honest_window(f: usize) -> u64 {
    5 * f as u64 + 2
}

pub fn check_agreement(trace: &Trace) -> Verdict {
    smr::agreement(&TraceIndex::build(trace))
}

pub fn check_liveness(trace: &Trace, window: u64) -> Verdict {
    smr::liveness(&TraceIndex::build(trace), window)
}

pub fn check_leader_utilization(trace: &Trace) -> Verdict {
    smr::leader_utilization(&TraceIndex::build(trace)).0
}

pub fn check_chain_quality(trace: &Trace) -> Verdict {
    smr::chain_quality(&TraceIndex::build(trace)).0
}

/// The five LBR properties plus termination, keyed by property name.
pub fn check_lbr_properties(trace: &Trace) -> BTreeMap<String, Verdict> {
    lbr::all(&TraceIndex::build(trace))
}

pub fn check_pacemaker(trace: &Trace) -> BTreeMap<String, Verdict> {
    structure::pacemaker(&TraceIndex::build(trace))
}

pub fn verify(trace: &Trace) -> VerificationReport {
    verify_with(trace, &VerifyOptions::default())
}

pub fn verify_with(trace: &Trace, opts: &VerifyOptions) -> VerificationReport {
    let ix = TraceIndex::build(trace);
    let f = trace.config.f;
    let mut verdicts = BTreeMap::new();

    verdicts.insert("agreement".to_string(), smr::agreement(&ix));
    let window = opts.liveness_window.unwrap_or(honest_window(f));
    verdicts.insert("liveness".to_string(), smr::liveness(&ix, window));
    let (util, skipped_per_epoch) = smr::leader_utilization(&ix);
    verdicts.insert("leader_utilization".to_string(), util);
    let (cq, worst) = smr::chain_quality(&ix);
    verdicts.insert("chain_quality".to_string(), cq);
    verdicts.extend(lbr::all(&ix));
    verdicts.extend(structure::pacemaker(&ix));
    verdicts.insert("election".to_string(), structure::election(&ix));
    verdicts.insert("node".to_string(), structure::node(&ix));
    verdicts.insert("sim".to_string(), structure::sim(&ix));

    let steady = metrics::steady_state_start(&ix);
    let queue = steady.map(|s| metrics::queue_latency(&ix, s, opts.offered_load));
    let metrics = Metrics {
        gst_round: ix.gst_round,
        horizon: ix.horizon,
        skipped_round_count: smr::skipped_rounds(&ix).len() as u64,
        skipped_per_epoch,
        chain_quality_worst_window: worst,
        honest_block_ratio: metrics::honest_block_ratio(&ix),
        committed_blocks: ix.committed_rounds.len(),
        steady_state_start: steady,
        commits_per_round: steady.map_or(0.0, |s| metrics::commits_per_round(&ix, s)),
        latency_in_rounds: queue.map_or(0.0, |q| q.mean_latency),
        censored_transactions: queue.map_or(0.0, |q| q.censored),
        slot_latency_in_rounds: steady.map_or(0.0, |s| metrics::slot_latency(&ix, s)),
    };
    VerificationReport { format_version: FORMAT_VERSION, verdicts, metrics }
}

#[cfg(test)]
mod tests;
