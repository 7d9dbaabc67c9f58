use std::collections::BTreeMap;

use crate::sim::config::{ExecutionConfig, Time};
use crate::sim::trace::{Event, Trace};
use crate::types::{BlockId, BlockStore, PartyId, RoundNumber};

/// Lookups shared by the checkers, built once per trace.
pub struct TraceIndex<'t> {
    pub trace: &'t Trace,
    /// Blocks rebuilt from `certify` events.
    pub store: BlockStore,
    /// `certify` events whose block the store rejected.
    pub store_errors: Vec<(usize, String)>,
    pub certify_event: BTreeMap<BlockId, usize>,
    pub gst_round: Option<RoundNumber>,
    pub horizon: RoundNumber,
    /// Commit events by block round, in trace order.
    pub committed_rounds: BTreeMap<RoundNumber, Vec<usize>>,
    /// Earliest notification time per round.
    pub round_start: BTreeMap<RoundNumber, Time>,
}

impl<'t> TraceIndex<'t> {
    pub fn build(trace: &'t Trace) -> Self {
        let cfg = &trace.config;
        let mut store = BlockStore::new(cfg.n.max(1));
        let mut store_errors = Vec::new();
        let mut certify_event = BTreeMap::new();
        let mut committed_rounds: BTreeMap<RoundNumber, Vec<usize>> = BTreeMap::new();
        let mut round_start: BTreeMap<RoundNumber, Time> = BTreeMap::new();
        // round -> every notification so far came at or after GST. Byzantine
        // parties count too: the pacemaker anchors each round at its earliest
        // notification, whoever receives it.
        let mut post_gst: BTreeMap<RoundNumber, bool> = BTreeMap::new();

        for (i, e) in trace.events.iter().enumerate() {
            match e {
                Event::Certify { block, .. } => match store.insert(block.clone()) {
                    Ok(()) => {
                        certify_event.insert(block.id, i);
                    }
                    Err(err) => store_errors.push((i, err.to_string())),
                },
                Event::Commit { block_round, .. } => committed_rounds.entry(*block_round).or_default().push(i),
                Event::NewRound { time, round, .. } => {
                    let s = round_start.entry(*round).or_insert(*time);
                    *s = (*s).min(*time);
                    let ok = post_gst.entry(*round).or_insert(true);
                    *ok &= *time >= cfg.gst;
                }
                _ => {}
            }
        }

        let gst_round = post_gst.iter().find(|(_, ok)| **ok).map(|(r, _)| *r);
        TraceIndex {
            trace,
            store,
            store_errors,
            certify_event,
            gst_round,
            horizon: RoundNumber(cfg.horizon_rounds),
            committed_rounds,
            round_start,
        }
    }

    pub fn config(&self) -> &'t ExecutionConfig {
        &self.trace.config
    }

    pub fn events(&self) -> impl Iterator<Item = (usize, &'t Event)> {
        self.trace.events.iter().enumerate()
    }

    pub fn honest(&self, p: PartyId) -> bool {
        !self.trace.config.is_byzantine(p)
    }

    /// Post-GST rounds `[g, H]`, or `None` when GST falls past the horizon.
    pub fn post_gst_rounds(&self) -> Option<(u64, u64)> {
        let g = self.gst_round?.0;
        (g <= self.horizon.0).then_some((g, self.horizon.0))
    }

    /// Index of the first `new_round` event of round `r`, used as the
    /// pointer for violations that are about an absence.
    pub fn round_event(&self, r: RoundNumber) -> usize {
        self.events().find(|(_, e)| matches!(e, Event::NewRound { round, .. } if *round == r)).map_or(0, |(i, _)| i)
    }

    /// Commit events by non-Byzantine parties.
    pub fn honest_commits(&self) -> impl Iterator<Item = (usize, &'t Event)> + '_ {
        self.events().filter(|(_, e)| matches!(e, Event::Commit { party, .. } if self.honest(*party)))
    }
}

/// One more than the longest run of rounds in `[lo, hi]` not in `hits`.
pub fn worst_window(lo: u64, hi: u64, hits: impl IntoIterator<Item = u64>) -> (u64, u64) {
    let mut hits: Vec<u64> = hits.into_iter().filter(|r| (lo..=hi).contains(r)).collect();
    hits.sort_unstable();
    hits.dedup();
    let mut worst = (0, lo);
    let mut prev = lo.wrapping_sub(1);
    for r in hits.into_iter().chain(std::iter::once(hi + 1)) {
        let gap = r - prev.wrapping_add(1);
        if gap > worst.0 {
            worst = (gap, prev.wrapping_add(1));
        }
        prev = r;
    }
    (worst.0 + 1, worst.1)
}
