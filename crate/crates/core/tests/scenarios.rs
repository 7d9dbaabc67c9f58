mod common;

use std::collections::{BTreeMap, BTreeSet};

use carousel_core::election::{ElectionPath, ElectorConfig};
use carousel_core::lbr::lbr_synchronized_set;
use carousel_core::sim::{run, AdversaryAction, Event, ExecutionConfig, Trace};
use carousel_core::types::{quorum, BlockId, PartyId, RoundNumber};
use carousel_core::verify::{verify, TraceIndex};
use common::*;

fn commits_by(t: &Trace, p: PartyId) -> Vec<(RoundNumber, RoundNumber)> {
    t.events
        .iter()
        .filter_map(|e| match e {
            Event::Commit { party, round, block_round, .. } if *party == p => Some((*round, *block_round)),
            _ => None,
        })
        .collect()
}

fn assert_all_pass(t: &Trace) {
    let r = verify(t);
    assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
}

#[test]
fn happy_round_robin_commits_every_round() {
    let t = run(&happy(4, ElectorConfig::round_robin(), 20, 0)).unwrap();
    for p in t.config.parties() {
        let c = commits_by(&t, p);
        assert_eq!(c.len(), 20, "{p}");
        assert!(c.iter().all(|(r, b)| r == b));
    }
    assert_all_pass(&t);
}

#[test]
fn progress_example_round_seven() {
    // All four parties synchronized on honest leader 2 at round 7 return
    // its certified round-7 block.
    let mut c = happy(4, ElectorConfig::round_robin(), 10, 5);
    c.gst = 0;
    let t = run(&c).unwrap();
    assert_eq!(lbr_synchronized_set(&t, RoundNumber(7), PartyId(3)).len(), 4);
    let certified: BTreeMap<BlockId, usize> = t
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Certify { block, .. } => Some((block.id, block.endorsers().len())),
            _ => None,
        })
        .collect();
    for e in &t.events {
        if let Event::LbrReturn { round, block, block_round, block_author, .. } = e {
            if round.0 == 7 {
                assert_eq!((*block_round, *block_author), (RoundNumber(7), Some(PartyId(3))));
                assert!(certified[block] >= 3);
            }
        }
    }
}

#[test]
fn crashed_leader_skips_then_recovers() {
    // Party 2 is the round-robin leader of round 2 and crashes after round 1.
    let mut c = happy(4, ElectorConfig::carousel(), 30, 1);
    c.faults.crash(PartyId(2), RoundNumber(1)).unwrap();
    let t = run(&c).unwrap();
    let r = verify(&t);
    assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    assert!(r.metrics.skipped_round_count <= (c.f as u64 + 4));
    let committed: BTreeSet<u64> = commits_by(&t, PartyId(0)).iter().map(|(_, b)| b.0).collect();
    // After recovery every round commits.
    let first_gap = (1..=30).filter(|r| !committed.contains(r)).max().unwrap_or(0);
    assert!(first_gap <= 6, "last skipped round {first_gap}");
    assert!((first_gap + 1..=30).all(|r| committed.contains(&r)));

    // Party 2 never acts after its crash and no certificate after round 1 lists it.
    let crash_at =
        t.events.iter().position(|e| matches!(e, Event::Crash { party, .. } if *party == PartyId(2))).unwrap();
    assert!(t.events[crash_at + 1..].iter().all(|e| e.party() != PartyId(2)));
    for e in &t.events {
        if let Event::Certify { block, .. } = e {
            if block.round.0 > 1 {
                assert!(!block.endorsers().contains(&PartyId(2)));
            }
        }
    }
}

#[test]
fn crash_bounds_last_invocation_round() {
    let mut c = happy(10, ElectorConfig::carousel(), 30, 2);
    c.faults.crash(PartyId(3), RoundNumber(10)).unwrap();
    let t = run(&c).unwrap();
    let last = t
        .events
        .iter()
        .filter_map(|e| match e {
            Event::LbrStart { party, round, .. } if *party == PartyId(3) => Some(*round),
            _ => None,
        })
        .max();
    assert_eq!(last, Some(RoundNumber(10)));
}

#[test]
fn crash_at_round_zero_never_participates() {
    let mut c = happy(4, ElectorConfig::carousel(), 15, 3);
    c.faults.crash(PartyId(1), RoundNumber(0)).unwrap();
    let t = run(&c).unwrap();
    let acts: Vec<&Event> = t.events.iter().filter(|e| e.party() == PartyId(1)).collect();
    assert_eq!(acts.len(), 1);
    assert_eq!(acts[0].kind(), "crash");
    assert_all_pass(&t);
}

#[test]
fn double_crash_rejected() {
    let mut c = happy(10, ElectorConfig::carousel(), 15, 3);
    c.faults.crash(PartyId(3), RoundNumber(10)).unwrap();
    assert!(c.faults.crash(PartyId(3), RoundNumber(12)).is_err());
}

#[test]
fn hide_from_all_but_one_then_reveal_keeps_agreement() {
    // Party 1 leads round 1 under both electors; it hides its block from
    // everyone except party 0 and reveals it to the rest at round 4.
    let mut c = happy(4, ElectorConfig::carousel(), 20, 4);
    c.faults.byzantine.insert(PartyId(1));
    let reveal = [(PartyId(0), RoundNumber(1)), (PartyId(2), RoundNumber(4)), (PartyId(3), RoundNumber(4))];
    c.adversary_script.push(AdversaryAction::HideReveal {
        party: PartyId(1),
        round: RoundNumber(1),
        reveal: reveal.into_iter().collect(),
    });
    let t = run(&c).unwrap();
    let hidden = t
        .events
        .iter()
        .find_map(|e| match e {
            Event::AdversaryAction { action, block: Some(b), .. } if action == "hide" => Some(*b),
            _ => None,
        })
        .expect("party 1 certified and hid its round-1 block");
    let returned_round1: BTreeSet<PartyId> = t
        .events
        .iter()
        .filter_map(|e| match e {
            Event::LbrReturn { party, round, block, .. } if round.0 == 1 && *block == hidden => Some(*party),
            _ => None,
        })
        .collect();
    assert!(returned_round1.contains(&PartyId(0)));
    assert!(!returned_round1.contains(&PartyId(2)));
    assert_all_pass(&t);
}

#[test]
fn envelope_violation_aborts_run() {
    let mut c = happy(4, ElectorConfig::carousel(), 10, 4);
    c.faults.byzantine.insert(PartyId(1));
    c.adversary_script.push(AdversaryAction::HideReveal {
        party: PartyId(1),
        round: RoundNumber(1),
        reveal: [(PartyId(1), RoundNumber(2))].into_iter().collect(),
    });
    assert!(matches!(run(&c), Err(carousel_core::SimError::Envelope(_))));
}

#[test]
fn stale_returns_never_commit() {
    // Failed rounds return the party's current head; the commit guard must
    // turn those into no-ops.
    let mut stale = 0;
    for seed in 0..10 {
        let mut rng = scenario_rng(99, seed);
        let c = byzantine(happy(7, ElectorConfig::carousel(), 60, seed), Script::Mixed, &mut rng);
        let t = run(&c).unwrap();
        let mut heads: BTreeMap<PartyId, BlockId> = BTreeMap::new();
        let genesis = TraceIndex::build(&t).store.genesis_id();
        for (i, e) in t.events.iter().enumerate() {
            match e {
                Event::Commit { party, block, .. } => {
                    heads.insert(*party, *block);
                }
                Event::LbrReturn { party, round, block, .. }
                    if !c.is_byzantine(*party) && *block == *heads.get(party).unwrap_or(&genesis) =>
                {
                    stale += 1;
                    let next = t.events.get(i + 1);
                    assert!(
                        !matches!(next, Some(Event::Commit { party: p, round: r, .. }) if p == party && r == round),
                        "stale return at event {i} committed"
                    );
                }
                _ => {}
            }
        }
        assert_all_pass(&t);
    }
    assert!(stale > 0);
}

#[test]
fn pre_gst_asynchrony_is_safe_and_recovers() {
    for seed in 0..10 {
        let mut c = with_gst(happy(7, ElectorConfig::carousel(), 80, seed), 20);
        c.pre_gst_max_skew = 3 * ROUND_TICKS;
        let t = run(&c).unwrap();
        let r = verify(&t);
        assert!(r.passed(), "seed {seed}: {:?}", r.failures().collect::<Vec<_>>());
        assert!(r.metrics.gst_round.unwrap().0 > 1);
    }
}

#[test]
fn scripted_link_delay_causes_divergence_but_not_disagreement() {
    let mut c = with_gst(happy(4, ElectorConfig::carousel(), 40, 8), 10);
    for to in [0u32, 2, 3] {
        c.link_delays.push(carousel_core::sim::LinkDelay { from: PartyId(1), to: PartyId(to), delay: 3 * ROUND_TICKS });
    }
    let t = run(&c).unwrap();
    assert_all_pass(&t);
}

#[test]
fn event_count_is_bounded() {
    for n in [4usize, 7, 10] {
        let h = 50;
        let t = run(&happy(n, ElectorConfig::carousel(), h, 1)).unwrap();
        assert!(t.events.len() as u64 <= 4 * h * (n * n) as u64);
    }
}

/// Crash-only progress: with `2f+1` invocations synchronized on a leader
/// alive at `r`, all of them return that leader's round-`r` block; and in a
/// round without crashes either no honest party returns a round-`r` block or
/// at least `2f+1` do.
#[test]
fn crash_only_progress_and_all_or_none() {
    for seed in 0..20 {
        let mut rng = scenario_rng(7, seed);
        let c = crash_random(with_gst(happy(10, ElectorConfig::carousel(), 120, seed), 5), 3, 1, 100, &mut rng);
        let t = run(&c).unwrap();
        assert_all_pass(&t);
        let ix = TraceIndex::build(&t);
        let g = ix.gst_round.unwrap();
        let crash_rounds: BTreeSet<RoundNumber> = c.faults.crashes.iter().map(|e| e.round).collect();
        let mut returns: BTreeMap<RoundNumber, BTreeMap<BlockId, usize>> = BTreeMap::new();
        for e in &t.events {
            if let Event::LbrReturn { round, block, block_round, .. } = e {
                if block_round == round {
                    *returns.entry(*round).or_default().entry(*block).or_default() += 1;
                }
            }
        }
        for (r, blocks) in returns.range(g..) {
            if crash_rounds.contains(r) {
                continue;
            }
            for (b, k) in blocks {
                assert!(*k >= quorum(c.f), "seed {seed} round {r}: only {k} returned {b}");
            }
        }
    }
}

/// After a round in which `2f+1` parties return the same block and nobody
/// crashes, those parties elect one common leader for the next round, and
/// that leader is alive.
#[test]
fn alive_leader_after_good_round() {
    for seed in 0..20 {
        let mut rng = scenario_rng(8, seed);
        let c = crash_random(happy(10, ElectorConfig::carousel(), 100, seed), 3, 1, 80, &mut rng);
        let t = run(&c).unwrap();
        let crash_rounds: BTreeSet<u64> = c.faults.crashes.iter().map(|e| e.round.0).collect();
        let mut elected: BTreeMap<u64, BTreeMap<PartyId, (PartyId, ElectionPath)>> = BTreeMap::new();
        let mut returned: BTreeMap<u64, BTreeMap<PartyId, BlockId>> = BTreeMap::new();
        for e in &t.events {
            match e {
                Event::Elect { party, round, leader, path, .. } => {
                    elected.entry(round.0).or_default().insert(*party, (*leader, *path));
                }
                Event::LbrReturn { party, round, block, block_round, .. } if block_round == round => {
                    returned.entry(round.0).or_default().insert(*party, *block);
                }
                _ => {}
            }
        }
        for (r, by_party) in &returned {
            if crash_rounds.contains(r) || by_party.len() < 2 * c.f + 1 {
                continue;
            }
            let Some(next) = elected.get(&(r + 1)) else { continue };
            let leaders: BTreeSet<PartyId> = by_party.keys().filter_map(|p| next.get(p)).map(|(l, _)| *l).collect();
            assert_eq!(leaders.len(), 1, "seed {seed} round {}", r + 1);
            let leader = *leaders.iter().next().unwrap();
            assert!(c.faults.crash_round(leader).is_none_or(|cr| cr.0 >= *r), "seed {seed}: dead leader {leader}");
            assert!(by_party.keys().all(|p| next.get(p).is_none_or(|(_, path)| *path == ElectionPath::Reputation)));
        }
    }
}

/// Any `f+3` consecutive post-GST rounds without crashes contain a round
/// whose block is committed.
#[test]
fn good_round_in_every_crash_free_stretch() {
    for seed in 0..20 {
        let mut rng = scenario_rng(9, seed);
        let c = crash_random(with_gst(happy(10, ElectorConfig::carousel(), 150, seed), 5), 3, 10, 140, &mut rng);
        let t = run(&c).unwrap();
        let ix = TraceIndex::build(&t);
        let g = ix.gst_round.unwrap().0;
        let crash_rounds: BTreeSet<u64> = c.faults.crashes.iter().map(|e| e.round.0).collect();
        let span = c.f as u64 + 3;
        for start in g..=(150 - span + 1) {
            if (start..start + span).any(|r| crash_rounds.contains(&r)) {
                continue;
            }
            let good = (start..start + span).any(|r| ix.committed_rounds.contains_key(&RoundNumber(r)));
            assert!(good, "seed {seed}: no committed block in rounds {start}..{}", start + span);
        }
    }
}

/// Under Byzantine attack, all honest parties still agree on one honest
/// leader in a steady share of post-GST rounds.
#[test]
fn honest_parties_share_an_honest_leader_often() {
    for seed in 0..10 {
        let mut rng = scenario_rng(10, seed);
        let c = byzantine(happy(10, ElectorConfig::carousel(), 200, seed), Script::Mixed, &mut rng);
        let t = run(&c).unwrap();
        let mut elected: BTreeMap<RoundNumber, BTreeSet<PartyId>> = BTreeMap::new();
        for e in &t.events {
            if let Event::Elect { party, round, leader, .. } = e {
                if !c.is_byzantine(*party) {
                    elected.entry(*round).or_default().insert(*leader);
                }
            }
        }
        let shared = elected.values().filter(|l| l.len() == 1 && !c.is_byzantine(*l.iter().next().unwrap())).count();
        assert!(shared * 4 >= elected.len(), "seed {seed}: only {shared} of {} rounds", elected.len());
    }
}

#[test]
fn withheld_proposal_skips_round() {
    let mut c: ExecutionConfig = happy(4, ElectorConfig::round_robin(), 12, 6);
    c.faults.byzantine.insert(PartyId(3));
    c.adversary_script.push(AdversaryAction::WithholdProposal { party: PartyId(3), round: RoundNumber(3) });
    let t = run(&c).unwrap();
    let r = verify(&t);
    assert!(r.passed());
    assert!(!TraceIndex::build(&t).committed_rounds.contains_key(&RoundNumber(3)));
    assert_eq!(r.metrics.skipped_round_count, 1);
}
