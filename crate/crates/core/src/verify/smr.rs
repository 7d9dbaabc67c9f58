//! The four Leader-Aware SMR properties.

use std::collections::BTreeMap;

use super::index::{worst_window, TraceIndex};
use super::{honest_window, Verdict};
use crate::sim::trace::Event;
use crate::types::{BlockId, RoundNumber};

/// Honest commits must all lie on one chain. Distinct committed blocks are
/// sorted by round and each consecutive pair must extend.
pub fn agreement(ix: &TraceIndex) -> Verdict {
    let mut first: BTreeMap<BlockId, (RoundNumber, usize)> = BTreeMap::new();
    for (i, e) in ix.honest_commits() {
        if let Event::Commit { block, block_round, .. } = e {
            first.entry(*block).or_insert((*block_round, i));
        }
    }
    let mut blocks: Vec<(RoundNumber, usize, BlockId)> = first.into_iter().map(|(b, (r, i))| (r, i, b)).collect();
    blocks.sort();

    for (_, i, b) in &blocks {
        if !ix.store.contains(*b) {
            return Verdict::fail(vec![*i], *i, format!("committed block {b} was never certified"));
        }
    }
    for w in blocks.windows(2) {
        let (ra, ia, a) = w[0];
        let (rb, ib, b) = w[1];
        let related = ra < rb && ix.store.extends(a, b).unwrap_or(false);
        if !related {
            return Verdict::fail(
                vec![ia, ib],
                ia,
                format!("committed blocks {a} (round {ra}) and {b} (round {rb}) are not on one chain"),
            );
        }
    }
    Verdict::Pass
}

/// Finite-horizon liveness: no post-GST run of `window` rounds in which no
/// honest party commits.
pub fn liveness(ix: &TraceIndex, window: u64) -> Verdict {
    let Some((g, h)) = ix.post_gst_rounds() else {
        return Verdict::na("GST falls beyond the horizon");
    };
    if h - g + 1 < window {
        return Verdict::na(format!("post-GST span {} is shorter than the window {window}", h - g + 1));
    }
    let hits = ix.honest_commits().filter_map(|(_, e)| match e {
        Event::Commit { round, .. } => Some(round.0),
        _ => None,
    });
    let (worst, start) = worst_window(g, h, hits);
    if worst > window {
        let r = RoundNumber(start);
        return Verdict::fail(
            vec![ix.round_event(r)],
            0,
            format!("no honest commit in {} rounds starting at round {r}", worst - 1),
        );
    }
    Verdict::Pass
}

/// Post-GST rounds in which no commit event carries a block of that round.
pub fn skipped_rounds(ix: &TraceIndex) -> Vec<u64> {
    let Some((g, h)) = ix.post_gst_rounds() else { return Vec::new() };
    (g..=h).filter(|r| !ix.committed_rounds.contains_key(&RoundNumber(*r))).collect()
}

/// Skipped-round bound for crash-only traces: at most `f+4` per crash epoch
/// and `(k+1)(f+4)` in total, where `k` counts distinct post-GST crash rounds.
pub fn leader_utilization(ix: &TraceIndex) -> (Verdict, Vec<u64>) {
    let cfg = ix.config();
    let Some((g, h)) = ix.post_gst_rounds() else {
        return (Verdict::na("GST falls beyond the horizon"), Vec::new());
    };
    let mut starts: Vec<u64> = cfg.faults.crashes.iter().map(|c| c.round.0).filter(|r| *r >= g && *r <= h).collect();
    starts.sort_unstable();
    starts.dedup();
    let k = starts.len() as u64;
    // Epoch 0 runs from g to the first crash round and may be empty.
    starts.insert(0, g);

    let skipped = skipped_rounds(ix);
    let mut per_epoch = Vec::with_capacity(starts.len());
    let mut worst: Option<(usize, u64)> = None;
    let bound = cfg.f as u64 + 4;
    for (e, lo) in starts.iter().enumerate() {
        let hi = starts.get(e + 1).copied().unwrap_or(h + 1);
        let count = skipped.iter().filter(|r| (*lo..hi).contains(*r)).count() as u64;
        if count > bound && worst.is_none() {
            worst = Some((e, *lo));
        }
        per_epoch.push(count);
    }

    if !cfg.faults.is_crash_only() {
        return (Verdict::na("trace has Byzantine parties"), per_epoch);
    }
    let total = skipped.len() as u64;
    let pointers = |lo: u64, hi: u64| -> Vec<usize> {
        skipped.iter().filter(|r| (lo..hi).contains(*r)).map(|r| ix.round_event(RoundNumber(*r))).collect()
    };
    if let Some((e, lo)) = worst {
        let hi = starts.get(e + 1).copied().unwrap_or(h + 1);
        return (
            Verdict::fail(
                pointers(lo, hi),
                0,
                format!("epoch {e} from round {lo} skips {} rounds > f+4 = {bound}", per_epoch[e]),
            ),
            per_epoch,
        );
    }
    if total > (k + 1) * bound {
        return (
            Verdict::fail(
                pointers(g, h + 1),
                0,
                format!("{total} skipped rounds exceed (k+1)(f+4) = {}", (k + 1) * bound),
            ),
            per_epoch,
        );
    }
    (Verdict::Pass, per_epoch)
}

/// Every post-GST window of `5f+2` rounds holds a committed honest block.
/// Also returns the worst window length observed.
pub fn chain_quality(ix: &TraceIndex) -> (Verdict, u64) {
    let Some((g, h)) = ix.post_gst_rounds() else {
        return (Verdict::na("GST falls beyond the horizon"), 0);
    };
    let window = honest_window(ix.config().f);
    let hits = ix.honest_commits().filter_map(|(_, e)| match e {
        Event::Commit { block_round, author: Some(a), .. } if ix.honest(*a) => Some(block_round.0),
        _ => None,
    });
    let (worst, start) = worst_window(g, h, hits);
    if h - g + 1 < window {
        return (Verdict::na(format!("post-GST span {} is shorter than {window}", h - g + 1)), worst);
    }
    if worst > window {
        let r = RoundNumber(start);
        return (
            Verdict::fail(
                vec![ix.round_event(r)],
                0,
                format!("no committed honest block in {} rounds from round {r}", worst - 1),
            ),
            worst,
        );
    }
    (Verdict::Pass, worst)
}
