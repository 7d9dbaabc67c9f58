//! Leader-based round (LBR): a three-step propose → endorse → certify
//! pattern over the simulated network.
//!
//! The engine in [`crate::sim`] drives the message flow; this module holds
//! the invocation types and the decision rules each step applies, the
//! adversary envelope for hide/reveal scripts, and the LBR-synchronized set
//! computed from a finished trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::config::{ExecutionConfig, Time, DEFAULT_DELTA};
use crate::sim::trace::{Event, Trace};
use crate::types::{quorum, Block, BlockId, BlockStore, PartyId, RoundNumber, StoreError};

/// Message steps per round for the propose/endorse/certify pattern.
pub const MESSAGE_STEPS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingConstants {
    /// Causal message steps per round (`c`).
    pub c: u64,
    /// Post-GST delivery bound (`δ`).
    pub delta: Time,
    /// Maximum invocation duration (`Δ_l`).
    pub round_duration: Time,
    /// Minimum pacemaker spacing between rounds (`Δ_p`).
    pub pacemaker_spacing: Time,
}

impl Default for TimingConstants {
    fn default() -> Self {
        TimingConstants {
            c: MESSAGE_STEPS,
            delta: DEFAULT_DELTA,
            round_duration: 4 * DEFAULT_DELTA,
            pacemaker_spacing: 4 * DEFAULT_DELTA,
        }
    }
}

impl TimingConstants {
    pub fn validate(&self) -> Result<(), String> {
        if self.delta == 0 {
            return Err("delta must be positive".into());
        }
        if self.c != MESSAGE_STEPS {
            return Err(format!("c must be {MESSAGE_STEPS} for the three-step pattern"));
        }
        if self.round_duration <= self.c * self.delta {
            return Err(format!(
                "round_duration {} must exceed c*delta = {}",
                self.round_duration,
                self.c * self.delta
            ));
        }
        if self.pacemaker_spacing != self.round_duration {
            return Err("pacemaker_spacing must equal round_duration".into());
        }
        Ok(())
    }

    /// Start-time tolerance for LBR-synchronized invocations: `Δ_l − cδ`.
    pub fn sync_window(&self) -> Time {
        self.round_duration - self.c * self.delta
    }
}

/// One party's `LBR(r, leader)` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbrInvocation {
    pub party: PartyId,
    pub round: RoundNumber,
    pub leader: PartyId,
    pub start_time: Time,
    pub deadline: Time,
}

impl LbrInvocation {
    pub fn new(
        party: PartyId,
        round: RoundNumber,
        leader: PartyId,
        start_time: Time,
        timing: &TimingConstants,
    ) -> Self {
        LbrInvocation { party, round, leader, start_time, deadline: start_time + timing.round_duration }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbrResult {
    pub block: BlockId,
    pub block_round: RoundNumber,
    pub block_author: Option<PartyId>,
}

/// An uncertified block as broadcast in step 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub id: BlockId,
    pub author: PartyId,
    pub round: RoundNumber,
    pub parent: BlockId,
    pub payload_size: u64,
}

impl Proposal {
    pub fn new(author: PartyId, round: RoundNumber, parent: BlockId, payload_size: u64) -> Self {
        Proposal { id: BlockId::derive(Some(author), round, parent, payload_size), author, round, parent, payload_size }
    }

    pub fn certify(&self, endorsers: BTreeSet<PartyId>) -> Block {
        Block::new(self.author, self.round, self.parent, self.payload_size, endorsers)
    }
}

/// Step-2 rule. A party endorses only inside its own active invocation for
/// the proposal's round, only a proposal by the leader it chose, at most once
/// per round, and only if the proposal builds on a certified parent at least
/// as high as the highest certified block the party knows.
pub fn may_endorse(
    active: Option<&LbrInvocation>,
    proposal: &Proposal,
    already_endorsed: bool,
    parent: Option<&Block>,
    known_round: RoundNumber,
) -> bool {
    let Some(inv) = active else { return false };
    if already_endorsed || inv.round != proposal.round || inv.leader != proposal.author {
        return false;
    }
    match parent {
        Some(p) => p.round < proposal.round && p.round >= known_round,
        None => false,
    }
}

/// Step-3 quorum selection: the earliest `2f+1` endorsements by arrival
/// time, ties broken by ascending party id.
pub fn select_endorsers(arrivals: &[(Time, PartyId)], f: usize) -> Option<BTreeSet<PartyId>> {
    let q = quorum(f);
    let mut sorted: Vec<(Time, PartyId)> = arrivals.to_vec();
    sorted.sort();
    sorted.dedup_by_key(|(_, p)| *p);
    let mut seen = BTreeSet::new();
    for (_, p) in sorted {
        seen.insert(p);
        if seen.len() == q {
            return Some(seen);
        }
    }
    None
}

/// Return value of an invocation: the highest block on the party's known
/// chain whose round is below the invocation round, or equal to it when the
/// block was authored by the invocation's leader.
pub fn return_value<'a>(
    store: &'a BlockStore,
    known_high: BlockId,
    inv: &LbrInvocation,
) -> Result<&'a Block, StoreError> {
    let mut b = store.get(known_high)?;
    loop {
        let eligible = b.round < inv.round || (b.round == inv.round && b.author == Some(inv.leader));
        if eligible || b.is_genesis() {
            return Ok(b);
        }
        b = store.get(b.parent)?;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("block {block} is not certified")]
    NotCertified { block: BlockId },
    #[error("reveal of round-{block_round} block to {party} at round {at} would return a future block")]
    FutureReturn { party: PartyId, block_round: RoundNumber, at: RoundNumber },
    #[error("reveal target {0} is not an honest party")]
    NotHonest(PartyId),
    #[error("hide/reveal by {party} on a block authored by {author:?}")]
    ForeignBlock { party: PartyId, author: Option<PartyId> },
}

/// A validated reveal schedule: party → round whose return surfaces the block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealSchedule {
    pub block: BlockId,
    pub reveals: BTreeMap<PartyId, RoundNumber>,
}

/// Checks a hide/reveal script against the LBR envelope. The block must be
/// certified and authored by the hiding party, targets must be honest, and
/// no target may receive the block before the block's own round.
pub fn adversary_hide_reveal(
    block: &Block,
    hider: PartyId,
    reveal_plan: &BTreeMap<PartyId, RoundNumber>,
    config: &ExecutionConfig,
) -> Result<RevealSchedule, EnvelopeError> {
    if !crate::types::certified(block, block.round, config.f) {
        return Err(EnvelopeError::NotCertified { block: block.id });
    }
    if block.author != Some(hider) {
        return Err(EnvelopeError::ForeignBlock { party: hider, author: block.author });
    }
    for (p, at) in reveal_plan {
        if p.index() >= config.n || config.is_byzantine(*p) {
            return Err(EnvelopeError::NotHonest(*p));
        }
        if *at < block.round {
            return Err(EnvelopeError::FutureReturn { party: *p, block_round: block.round, at: *at });
        }
    }
    Ok(RevealSchedule { block: block.id, reveals: reveal_plan.clone() })
}

/// Maximal set of non-Byzantine parties whose post-GST round-`r`
/// invocations with leader `leader` all start within `Δ_l − cδ` of each
/// other. When several windows are maximal the earliest wins.
pub fn lbr_synchronized_set(trace: &Trace, r: RoundNumber, leader: PartyId) -> BTreeSet<PartyId> {
    let cfg = &trace.config;
    let starts: Vec<(Time, PartyId)> = trace
        .events
        .iter()
        .filter_map(|e| match e {
            Event::LbrStart { time, party, round, leader: l, .. }
                if *round == r && *l == leader && *time >= cfg.gst && !cfg.is_byzantine(*party) =>
            {
                Some((*time, *party))
            }
            _ => None,
        })
        .collect();
    synchronized_window(starts, cfg.timing.sync_window())
}

/// Largest set of invocation starts spanning at most `window`; the earliest
/// such set when several are maximal.
pub(crate) fn synchronized_window(mut starts: Vec<(Time, PartyId)>, window: Time) -> BTreeSet<PartyId> {
    starts.sort();
    let mut best: &[(Time, PartyId)] = &[];
    let mut lo = 0;
    for hi in 0..starts.len() {
        while starts[hi].0 - starts[lo].0 > window {
            lo += 1;
        }
        if hi + 1 - lo > best.len() {
            best = &starts[lo..=hi];
        }
    }
    best.iter().map(|(_, p)| *p).collect()
}
