//! Hand-forged trace mutations. Each takes a valid trace and plants one
//! specific violation so the checkers can be shown to reject it.

use crate::sim::config::Time;
use crate::sim::trace::{Event, Trace};
use crate::types::{Block, PartyId, RoundNumber};

/// Lists an honest party that never endorsed the block in the first
/// certificate where one exists. Targets the Reputation check.
pub fn forge_endorser(trace: &Trace) -> Option<Trace> {
    let mut t = trace.clone();
    let cfg = trace.config.clone();
    let endorsed = |p: PartyId, id| {
        trace.events.iter().any(|e| matches!(e, Event::Endorse { party, block, .. } if *party == p && *block == id))
    };
    for e in &mut t.events {
        if let Event::Certify { block, .. } = e {
            let outsider = cfg.parties().find(|p| !cfg.is_byzantine(*p) && !endorsed(*p, block.id));
            if let Some(p) = outsider {
                block.certificate.endorsers.insert(p);
                return Some(t);
            }
        }
    }
    None
}

/// Swaps the round numbers of a party's notifications for rounds 2 and 3.
/// Targets the pacemaker ordering check.
pub fn swap_notifications(trace: &Trace, party: PartyId) -> Option<Trace> {
    let mut t = trace.clone();
    let find = |t: &Trace, r: u64| {
        t.events
            .iter()
            .position(|e| matches!(e, Event::NewRound { party: p, round, .. } if *p == party && round.0 == r))
    };
    let (a, b) = (find(&t, 2)?, find(&t, 3)?);
    if let Event::NewRound { round, .. } = &mut t.events[a] {
        *round = RoundNumber(3);
    }
    if let Event::NewRound { round, .. } = &mut t.events[b] {
        *round = RoundNumber(2);
    }
    Some(t)
}

/// Pushes the first honest return past its deadline. Targets the
/// termination check.
pub fn delay_return(trace: &Trace) -> Option<Trace> {
    let mut t = trace.clone();
    let extra: Time = t.config.timing.round_duration + 1;
    let cfg = t.config.clone();
    for e in &mut t.events {
        if let Event::LbrReturn { time, party, .. } = e {
            if !cfg.is_byzantine(*party) {
                *time += extra;
                return Some(t);
            }
        }
    }
    None
}

/// Certifies a sibling of the first committed block and makes one honest
/// party commit the sibling instead. Targets Agreement.
pub fn forge_fork(trace: &Trace) -> Option<Trace> {
    let mut t = trace.clone();
    let cfg = t.config.clone();
    let (idx, original) = t.events.iter().enumerate().find_map(|(i, e)| match e {
        Event::Certify { block, .. } => Some((i, block.clone())),
        _ => None,
    })?;
    let other_author = cfg.parties().find(|p| Some(*p) != original.author)?;
    let fork = Block::new(
        other_author,
        original.round,
        original.parent,
        original.payload_size + 1,
        original.certificate.endorsers.clone(),
    );
    let time = t.events[idx].time();
    t.events.insert(idx + 1, Event::Certify { time, party: other_author, block: fork.clone() });

    let victim = t.events.iter_mut().find(
        |e| matches!(e, Event::Commit { block, party, .. } if *block == original.id && !cfg.is_byzantine(*party)),
    )?;
    if let Event::Commit { block, author, .. } = victim {
        *block = fork.id;
        *author = fork.author;
    }
    // Ensure a different honest party commits the original.
    let committers =
        t.events.iter().filter(|e| matches!(e, Event::Commit { block, .. } if *block == original.id)).count();
    (committers > 0).then_some(t)
}
