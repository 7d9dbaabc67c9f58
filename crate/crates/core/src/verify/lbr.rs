use std::collections::{BTreeMap, BTreeSet};

use super::index::TraceIndex;
use super::Verdict;
use crate::lbr::synchronized_window;
use crate::sim::config::Time;
use crate::sim::trace::Event;
use crate::types::{quorum, BlockId, PartyId, RoundNumber};

struct Start {
    idx: usize,
    time: Time,
    leader: PartyId,
    deadline: Time,
}

struct Return {
    idx: usize,
    time: Time,
    leader: PartyId,
    start: Time,
    block: BlockId,
    block_round: RoundNumber,
    block_author: Option<PartyId>,
}

struct Invocations {
    starts: BTreeMap<(PartyId, RoundNumber), Start>,
    returns: BTreeMap<(PartyId, RoundNumber), Return>,
    endorsed: BTreeSet<(PartyId, BlockId)>,
}

impl Invocations {
    fn collect(ix: &TraceIndex) -> Self {
        let mut inv = Invocations { starts: BTreeMap::new(), returns: BTreeMap::new(), endorsed: BTreeSet::new() };
        for (i, e) in ix.events() {
            match e {
                Event::LbrStart { time, party, round, leader, deadline } => {
                    inv.starts.entry((*party, *round)).or_insert(Start {
                        idx: i,
                        time: *time,
                        leader: *leader,
                        deadline: *deadline,
                    });
                }
                Event::LbrReturn { time, party, round, leader, start, block, block_round, block_author } => {
                    inv.returns.entry((*party, *round)).or_insert(Return {
                        idx: i,
                        time: *time,
                        leader: *leader,
                        start: *start,
                        block: *block,
                        block_round: *block_round,
                        block_author: *block_author,
                    });
                }
                Event::Endorse { party, block, .. } => {
                    inv.endorsed.insert((*party, *block));
                }
                _ => {}
            }
        }
        inv
    }

    fn self_invoked(&self, author: PartyId, r: RoundNumber) -> bool {
        self.starts.get(&(author, r)).is_some_and(|s| s.leader == author)
    }
}

pub fn all(ix: &TraceIndex) -> BTreeMap<String, Verdict> {
    let inv = Invocations::collect(ix);
    [
        ("lbr_endorsement", endorsement(ix)),
        ("lbr_agreement", agreement(ix, &inv)),
        ("lbr_progress", progress(ix, &inv)),
        ("lbr_blocking", blocking(ix, &inv)),
        ("lbr_reputation", reputation(ix, &inv)),
        ("lbr_termination", termination(ix, &inv)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn endorsement(ix: &TraceIndex) -> Verdict {
    let q = quorum(ix.config().f);
    for (i, e) in ix.events() {
        if let Event::Certify { block, .. } = e {
            let c = &block.certificate;
            if c.endorsers.len() < q || c.round != block.round {
                return Verdict::fail(
                    vec![i],
                    i,
                    format!("certificate of {} has {} endorsers for round {}", block.id, c.endorsers.len(), c.round),
                );
            }
        }
    }
    Verdict::Pass
}

fn agreement(ix: &TraceIndex, inv: &Invocations) -> Verdict {
    let mut seen: BTreeMap<BlockId, (RoundNumber, usize)> = BTreeMap::new();
    for ((p, _), ret) in &inv.returns {
        if ix.honest(*p) {
            seen.entry(ret.block).or_insert((ret.block_round, ret.idx));
        }
    }
    let mut blocks: Vec<(RoundNumber, usize, BlockId)> = seen.into_iter().map(|(b, (r, i))| (r, i, b)).collect();
    blocks.sort();
    for (_, i, b) in &blocks {
        if !ix.store.contains(*b) {
            return Verdict::fail(vec![*i], *i, format!("returned block {b} is not certified"));
        }
    }
    for w in blocks.windows(2) {
        let ((ra, ia, a), (rb, ib, b)) = (w[0], w[1]);
        if !(ra < rb && ix.store.extends(a, b).unwrap_or(false)) {
            return Verdict::fail(vec![ia, ib], ia, format!("returned blocks {a} and {b} are not on one chain"));
        }
    }
    Verdict::Pass
}

/// Whenever `2f+1` post-GST invocations are synchronized on an honest leader
/// whose own invocation is among them, every one of them returns that
/// leader's round-`r` block.
fn progress(ix: &TraceIndex, inv: &Invocations) -> Verdict {
    let cfg = ix.config();
    let q = quorum(cfg.f);
    let window = cfg.timing.sync_window();
    let mut groups: BTreeMap<(RoundNumber, PartyId), Vec<(Time, PartyId)>> = BTreeMap::new();
    for ((p, r), s) in &inv.starts {
        if ix.honest(*p) && s.time >= cfg.gst {
            groups.entry((*r, s.leader)).or_default().push((s.time, *p));
        }
    }
    for ((r, leader), starts) in groups {
        if !ix.honest(leader) || !inv.self_invoked(leader, r) {
            continue;
        }
        let synced = synchronized_window(starts, window);
        // The leader's own invocation has to be in the window too: one started
        // before GST may send its proposal too late for the others.
        if synced.len() < q || !synced.contains(&leader) {
            continue;
        }
        for p in &synced {
            let ok =
                inv.returns.get(&(*p, r)).is_some_and(|ret| ret.block_round == r && ret.block_author == Some(leader));
            if !ok {
                let mut events = vec![inv.starts[&(*p, r)].idx];
                events.extend(inv.returns.get(&(*p, r)).map(|ret| ret.idx));
                return Verdict::fail(
                    events,
                    0,
                    format!(
                        "{} synchronized invocations on {leader} at round {r}, but {p} did not return its block",
                        synced.len()
                    ),
                );
            }
        }
    }
    Verdict::Pass
}

/// A round-`r` block is only ever returned by an invocation led by its
/// author, and only if that author invoked `LBR(r, author)` itself.
fn blocking(ix: &TraceIndex, inv: &Invocations) -> Verdict {
    for ((p, r), ret) in &inv.returns {
        if !ix.honest(*p) || ret.block_round == RoundNumber::GENESIS {
            continue;
        }
        if ret.block_round == *r && ret.block_author != Some(ret.leader) {
            return Verdict::fail(
                vec![ret.idx],
                ret.idx,
                format!(
                    "{p} returned a round-{r} block by {:?} from an invocation led by {}",
                    ret.block_author, ret.leader
                ),
            );
        }
        let author = ret.block_author;
        if !author.is_some_and(|a| inv.self_invoked(a, ret.block_round)) {
            return Verdict::fail(
                vec![ret.idx],
                ret.idx,
                format!(
                    "{p} returned block {} of round {} whose author never invoked that round",
                    ret.block, ret.block_round
                ),
            );
        }
    }
    Verdict::Pass
}

/// Non-Byzantine endorsers listed in a certificate must have invoked LBR for
/// that round and endorsed that very block.
fn reputation(ix: &TraceIndex, inv: &Invocations) -> Verdict {
    for (i, e) in ix.events() {
        let Event::Certify { block, .. } = e else { continue };
        for p in block.endorsers() {
            if !ix.honest(*p) {
                continue;
            }
            let invoked = inv.starts.contains_key(&(*p, block.round));
            if !invoked || !inv.endorsed.contains(&(*p, block.id)) {
                let mut events = vec![i];
                events.extend(inv.starts.get(&(*p, block.round)).map(|s| s.idx));
                return Verdict::fail(
                    events,
                    i,
                    format!(
                        "{p} is listed as an endorser of {} (round {}) but never endorsed it",
                        block.id, block.round
                    ),
                );
            }
        }
    }
    Verdict::Pass
}

/// Every honest invocation returns by its deadline, at most `Δ_l` after it
/// started, with a block no newer than its round.
fn termination(ix: &TraceIndex, inv: &Invocations) -> Verdict {
    let delta_l = ix.config().timing.round_duration;
    for ((p, r), s) in &inv.starts {
        if !ix.honest(*p) {
            continue;
        }
        let Some(ret) = inv.returns.get(&(*p, *r)) else {
            return Verdict::fail(vec![s.idx], s.idx, format!("{p} never returned from round {r}"));
        };
        let late = ret.time > s.deadline || ret.time.saturating_sub(s.time) > delta_l || ret.start != s.time;
        if late || ret.time < s.time {
            return Verdict::fail(
                vec![s.idx, ret.idx],
                s.idx,
                format!("{p} round {r}: started {} returned {} (Δ_l = {delta_l})", s.time, ret.time),
            );
        }
        if ret.block_round > *r || ret.leader != s.leader {
            return Verdict::fail(
                vec![s.idx, ret.idx],
                s.idx,
                format!("{p} round {r} returned a round-{} block or changed leader", ret.block_round),
            );
        }
    }
    for ((p, r), ret) in &inv.returns {
        if ix.honest(*p) && !inv.starts.contains_key(&(*p, *r)) {
            return Verdict::fail(vec![ret.idx], ret.idx, format!("{p} returned from round {r} it never started"));
        }
    }
    Verdict::Pass
}
