//! Pacemaker timing, election, per-node log and simulator sanity checks.

use std::collections::{BTreeMap, BTreeSet};

use super::index::TraceIndex;
use super::Verdict;
use crate::election::{ElectionPath, Strategy};
use crate::sim::config::Time;
use crate::sim::trace::Event;
use crate::types::{BlockId, PartyId, RoundNumber};

pub fn pacemaker(ix: &TraceIndex) -> BTreeMap<String, Verdict> {
    let mut by_round: BTreeMap<RoundNumber, Vec<(Time, usize)>> = BTreeMap::new();
    let mut honest_by_round: BTreeMap<RoundNumber, Vec<(Time, usize)>> = BTreeMap::new();
    let mut by_party: BTreeMap<PartyId, Vec<(RoundNumber, Time, usize)>> = BTreeMap::new();
    for (i, e) in ix.events() {
        if let Event::NewRound { time, party, round } = e {
            by_round.entry(*round).or_default().push((*time, i));
            if ix.honest(*party) {
                honest_by_round.entry(*round).or_default().push((*time, i));
            }
            by_party.entry(*party).or_default().push((*round, *time, i));
        }
    }
    let g = ix.gst_round.unwrap_or(RoundNumber(u64::MAX));
    let timing = ix.config().timing;

    let mut skew = Verdict::Pass;
    for (r, notes) in honest_by_round.range(g..) {
        let (lo, hi) = (notes.iter().min().unwrap(), notes.iter().max().unwrap());
        if hi.0 - lo.0 > timing.delta {
            skew = Verdict::fail(vec![lo.1, hi.1], lo.1, format!("round {r} notifications span {} > δ", hi.0 - lo.0));
            break;
        }
    }

    let mut spacing = Verdict::Pass;
    for ((r, a), (_, b)) in by_round.range(g..).zip(by_round.range(g..).skip(1)) {
        let last = a.iter().max().unwrap();
        let first = b.iter().min().unwrap();
        if first.0 < last.0 + timing.pacemaker_spacing {
            spacing = Verdict::fail(
                vec![last.1, first.1],
                last.1,
                format!(
                    "round {} starts {} after the last round-{r} notification (< Δ_p)",
                    r.next(),
                    first.0 - last.0.min(first.0)
                ),
            );
            break;
        }
    }

    let cfg = ix.config();
    let mut order = Verdict::Pass;
    'parties: for p in cfg.parties() {
        let notes = by_party.get(&p).map(Vec::as_slice).unwrap_or(&[]);
        for w in notes.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                order = Verdict::fail(
                    vec![w[0].2, w[1].2],
                    w[0].2,
                    format!("{p} notified of round {} after round {}", w[1].0, w[0].0),
                );
                break 'parties;
            }
        }
        if !ix.honest(p) {
            continue;
        }
        let last = cfg.faults.crash_round(p).map_or(ix.horizon.0, |c| c.0.min(ix.horizon.0));
        let got: BTreeSet<u64> = notes.iter().map(|n| n.0 .0).collect();
        if let Some(missing) = (1..=last).find(|r| !got.contains(r)) {
            let r = RoundNumber(missing);
            order = Verdict::fail(vec![ix.round_event(r)], 0, format!("{p} never notified of round {r}"));
            break;
        }
    }

    [("pacemaker_skew", skew), ("pacemaker_spacing", spacing), ("pacemaker_order", order)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Election events agree with the party's commit head at election time.
pub fn election(ix: &TraceIndex) -> Verdict {
    let cfg = ix.config();
    let genesis = ix.store.genesis_id();
    let mut heads: BTreeMap<PartyId, BlockId> = cfg.parties().map(|p| (p, genesis)).collect();
    let g = ix.gst_round.unwrap_or(RoundNumber(u64::MAX));
    let crash_only = cfg.faults.is_crash_only();

    for (i, e) in ix.events() {
        match e {
            Event::Commit { party, block, .. } => {
                heads.insert(*party, *block);
            }
            Event::Elect { party, round, path, candidates, excluded, leader, .. } if ix.honest(*party) => {
                let Ok(head) = ix.store.get(heads[party]) else {
                    return Verdict::fail(vec![i], i, format!("{party} elects from an uncertified head"));
                };
                let bad = |detail: String| Verdict::fail(vec![i], i, format!("{party} round {round}: {detail}"));
                let reputation_possible = cfg.elector.strategy == Strategy::Carousel && head.round.0 + 1 == round.0;
                match path {
                    ElectionPath::Fallback => {
                        if reputation_possible {
                            return bad("fallback taken although the head is from the previous round".into());
                        }
                        if leader.0 as u64 != round.0 % cfg.n as u64 {
                            return bad(format!("fallback leader {leader} is not r mod n"));
                        }
                    }
                    ElectionPath::Reputation => {
                        if !reputation_possible {
                            return bad(format!("reputation path from a round-{} head", head.round));
                        }
                        if candidates.len() < cfg.f + 1 {
                            return bad(format!("only {} candidates", candidates.len()));
                        }
                        if !candidates.contains(leader) || excluded.contains(leader) {
                            return bad(format!("leader {leader} is not an eligible candidate"));
                        }
                        if candidates.iter().any(|c| excluded.contains(c) || !head.endorsers().contains(c)) {
                            return bad("candidate set is not head endorsers minus recent authors".into());
                        }
                        let crashed_before = cfg.faults.crash_round(*leader).is_some_and(|c| c < head.round);
                        if crash_only && *round >= g && crashed_before {
                            return bad(format!("leader {leader} had crashed before the head round {}", head.round));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Verdict::Pass
}

/// Each honest log is a chain with increasing rounds, and no honest party
/// endorses twice in a round.
pub fn node(ix: &TraceIndex) -> Verdict {
    let genesis = ix.store.genesis_id();
    let mut heads: BTreeMap<PartyId, (BlockId, RoundNumber, Option<usize>)> = BTreeMap::new();
    let mut endorsed: BTreeMap<(PartyId, RoundNumber), usize> = BTreeMap::new();
    for (i, e) in ix.events() {
        match e {
            Event::Commit { party, round, block, block_round, .. } if ix.honest(*party) => {
                let (head, head_round, prev) = *heads.entry(*party).or_insert((genesis, RoundNumber::GENESIS, None));
                let parent = ix.store.get(*block).map(|b| b.parent).ok();
                let mut events = vec![i];
                events.extend(prev);
                if parent != Some(head) || *block_round <= head_round || block_round > round {
                    return Verdict::fail(events, i, format!("{party} committed {block} out of chain order"));
                }
                heads.insert(*party, (*block, *block_round, Some(i)));
            }
            Event::Endorse { party, round, .. } if ix.honest(*party) => {
                if let Some(prev) = endorsed.insert((*party, *round), i) {
                    return Verdict::fail(vec![prev, i], i, format!("{party} endorsed twice in round {round}"));
                }
            }
            _ => {}
        }
    }
    Verdict::Pass
}

pub fn sim(ix: &TraceIndex) -> Verdict {
    if let Some((i, err)) = ix.store_errors.first() {
        return Verdict::fail(vec![*i], *i, format!("certified block rejected: {err}"));
    }
    let cfg = ix.config();
    let mut crashed: BTreeMap<PartyId, usize> = BTreeMap::new();
    let mut last: Option<(usize, Time)> = None;
    for (i, e) in ix.events() {
        if let Some((j, t)) = last {
            if e.time() < t {
                return Verdict::fail(vec![j, i], i, format!("time goes backwards at event {i}"));
            }
        }
        last = Some((i, e.time()));
        if let Some(c) = crashed.get(&e.party()) {
            return Verdict::fail(vec![*c, i], i, format!("{} acts after crashing", e.party()));
        }
        if let Event::Crash { party, round, .. } = e {
            if cfg.faults.crash_round(*party) != Some(*round) {
                return Verdict::fail(
                    vec![i],
                    i,
                    format!("{party} crashed at round {round} outside the fault schedule"),
                );
            }
            crashed.insert(*party, i);
        }
    }
    Verdict::Pass
}
