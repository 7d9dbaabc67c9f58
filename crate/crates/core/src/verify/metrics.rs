//! Throughput and latency measurements over the steady-state window.
//!
//! Time is measured in rounds. A block of round `b` is proposed at
//! round-time `b` and counts as committed at the end of the first round in
//! which an honest party commits it.

use std::collections::BTreeMap;

use super::index::TraceIndex;
use crate::sim::trace::Event;
use crate::types::RoundNumber;

/// Default offered load as a fraction of block capacity.
pub const DEFAULT_OFFERED_LOAD: f64 = 0.85;

/// Rounds allowed for the elector to settle after the last crash.
const SETTLE_ROUNDS: u64 = 5;

/// `max(g, last crash + f + 5)`, or `None` if that lies past the horizon.
pub fn steady_state_start(ix: &TraceIndex) -> Option<RoundNumber> {
    let g = ix.gst_round?;
    let cfg = ix.config();
    let settled = cfg
        .faults
        .crashes
        .iter()
        .map(|c| c.round.0)
        .filter(|r| *r <= ix.horizon.0)
        .max()
        .map_or(0, |c| c + cfg.f as u64 + SETTLE_ROUNDS);
    let s = g.0.max(settled);
    (s <= ix.horizon.0).then_some(RoundNumber(s))
}

/// Block round → round-time of its first honest commit.
fn commit_times(ix: &TraceIndex) -> BTreeMap<u64, u64> {
    let mut out: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, e) in ix.honest_commits() {
        if let Event::Commit { round, block_round, .. } = e {
            let t = out.entry(block_round.0).or_insert(u64::MAX);
            *t = (*t).min(round.0 + 1);
        }
    }
    out
}

pub fn commits_per_round(ix: &TraceIndex, start: RoundNumber) -> f64 {
    let h = ix.horizon.0;
    let times = commit_times(ix);
    let hits = times.range(start.0..=h).count();
    hits as f64 / (h - start.0 + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueStats {
    pub mean_latency: f64,
    pub served: f64,
    pub censored: f64,
}

/// FIFO fluid queue: transactions arrive uniformly at `load × payload_size`
/// per round from `start` to the horizon; each committed block takes up to
/// `payload_size` of the oldest transactions that arrived before it was
/// proposed.
pub fn queue_latency(ix: &TraceIndex, start: RoundNumber, load: f64) -> QueueStats {
    let h = ix.horizon.0;
    let s = start.0 as f64;
    let capacity = ix.config().payload_size as f64;
    let rate = load * capacity;
    let total = rate * (h + 1 - start.0) as f64;
    if rate <= 0.0 {
        return QueueStats { mean_latency: 0.0, served: 0.0, censored: 0.0 };
    }
    let mut served = 0.0;
    let mut weighted = 0.0;
    for (b, c) in commit_times(ix).range(start.0..=h) {
        let arrived = rate * (*b as f64 - s);
        let take = capacity.min(arrived - served);
        if take <= 0.0 {
            continue;
        }
        let mean_arrival = s + (served + take / 2.0) / rate;
        weighted += take * (*c as f64 - mean_arrival);
        served += take;
    }
    let mean_latency = if served > 0.0 { weighted / served } else { 0.0 };
    QueueStats { mean_latency, served, censored: total - served }
}

/// Mean over rounds `r` in the window of the wait until a block of round
/// `r` or later commits. Rounds with no such commit before the horizon are
/// left out.
pub fn slot_latency(ix: &TraceIndex, start: RoundNumber) -> f64 {
    let h = ix.horizon.0;
    let times = commit_times(ix);
    let mut best = u64::MAX;
    let mut sum = 0u64;
    let mut count = 0u64;
    for r in (start.0..=h).rev() {
        if let Some(c) = times.get(&r) {
            best = best.min(*c);
        }
        if best != u64::MAX {
            sum += best - r;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

/// Share of honest-authored blocks on the longest committed chain.
pub fn honest_block_ratio(ix: &TraceIndex) -> f64 {
    let tip = ix
        .honest_commits()
        .filter_map(|(_, e)| match e {
            Event::Commit { block, block_round, .. } => Some((*block_round, *block)),
            _ => None,
        })
        .max();
    let Some((_, tip)) = tip else { return 1.0 };
    let Ok(chain) = ix.store.implied_chain(tip) else { return 1.0 };
    let blocks: Vec<_> = chain.into_iter().filter(|b| !b.is_genesis()).collect();
    if blocks.is_empty() {
        return 1.0;
    }
    let honest = blocks.iter().filter(|b| b.author.is_some_and(|a| ix.honest(a))).count();
    honest as f64 / blocks.len() as f64
}
