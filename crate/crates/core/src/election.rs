//! Leader rotation: the `choose_leader(r, commit_head)` interface with the
//! Carousel reputation rule and the round-robin baseline.
//!
//! Both electors are pure functions of the round, the caller's commit head
//! and the block store, so every party holding the same head computes the
//! same leader without communicating.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{Block, BlockStore, Fnv64, PartyId, RoundNumber, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Carousel,
    RoundRobin,
}

/// How Carousel picks one party out of the candidate set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickRule {
    /// Sorted candidates, index `r mod |candidates|`.
    #[default]
    RoundRobinOverCandidates,
    LowestId,
    /// Sorted candidates, index `fnv(r) mod |candidates|`.
    SeededHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectorConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub pick_rule: PickRule,
}

impl std::str::FromStr for ElectorConfig {
    type Err = String;

    /// Inverse of [`ElectorConfig::name`].
    fn from_str(s: &str) -> Result<Self, String> {
        let pick_rule = match s.split_once(':').map(|(_, r)| r) {
            None | Some("round_robin_over_candidates") => PickRule::RoundRobinOverCandidates,
            Some("lowest_id") => PickRule::LowestId,
            Some("seeded_hash") => PickRule::SeededHash,
            Some(other) => return Err(format!("unknown pick rule `{other}`")),
        };
        match s.split(':').next() {
            Some("carousel") => Ok(ElectorConfig { strategy: Strategy::Carousel, pick_rule }),
            Some("round_robin") if pick_rule == PickRule::RoundRobinOverCandidates => Ok(ElectorConfig::round_robin()),
            _ => Err(format!("unknown elector `{s}` (expected carousel[:pick_rule] or round_robin)")),
        }
    }
}

impl ElectorConfig {
    pub fn carousel() -> Self {
        ElectorConfig { strategy: Strategy::Carousel, pick_rule: PickRule::default() }
    }

    pub fn round_robin() -> Self {
        ElectorConfig { strategy: Strategy::RoundRobin, pick_rule: PickRule::default() }
    }

    /// Short label: `carousel`, `round_robin`, or `carousel:<pick_rule>`
    /// for a non-default pick rule.
    pub fn name(&self) -> String {
        match (self.strategy, self.pick_rule) {
            (Strategy::RoundRobin, _) => "round_robin".into(),
            (Strategy::Carousel, PickRule::RoundRobinOverCandidates) => "carousel".into(),
            (Strategy::Carousel, PickRule::LowestId) => "carousel:lowest_id".into(),
            (Strategy::Carousel, PickRule::SeededHash) => "carousel:seeded_hash".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectionPath {
    Fallback,
    Reputation,
}

/// Outcome of one `choose_leader` call, with the intermediate sets kept for
/// tracing and verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Election {
    pub leader: PartyId,
    pub path: ElectionPath,
    /// Sorted `active \ last_authors`; empty on the fallback path.
    pub candidates: Vec<PartyId>,
    /// Distinct recent authors excluded from candidacy.
    pub excluded: BTreeSet<PartyId>,
}

#[derive(Debug, Clone, Copy)]
pub struct LeaderElector {
    pub config: ElectorConfig,
    pub n: usize,
    pub f: usize,
}

impl LeaderElector {
    pub fn new(config: ElectorConfig, n: usize, f: usize) -> Self {
        LeaderElector { config, n, f }
    }

    pub fn choose_leader(
        &self,
        r: RoundNumber,
        commit_head: &Block,
        store: &BlockStore,
    ) -> Result<Election, StoreError> {
        match self.config.strategy {
            Strategy::RoundRobin => Ok(fallback(r, self.n)),
            Strategy::Carousel => choose_leader_carousel(r, commit_head, store, self.n, self.f, self.config.pick_rule),
        }
    }
}

pub fn choose_leader_round_robin(r: RoundNumber, n: usize) -> PartyId {
    PartyId((r.0 % n as u64) as u32)
}

fn fallback(r: RoundNumber, n: usize) -> Election {
    Election {
        leader: choose_leader_round_robin(r, n),
        path: ElectionPath::Fallback,
        candidates: Vec::new(),
        excluded: BTreeSet::new(),
    }
}

/// Carousel. Falls back to round-robin unless the commit head was formed in
/// round `r - 1`; otherwise elects among the head's endorsers, excluding the
/// last `f` distinct authors on the head's implied chain.
pub fn choose_leader_carousel(
    r: RoundNumber,
    commit_head: &Block,
    store: &BlockStore,
    n: usize,
    f: usize,
    pick_rule: PickRule,
) -> Result<Election, StoreError> {
    if commit_head.round.0 + 1 != r.0 {
        return Ok(fallback(r, n));
    }
    let active = commit_head.endorsers();

    let mut last_authors = BTreeSet::new();
    let mut block = commit_head;
    while last_authors.len() < f && !block.is_genesis() {
        // Non-genesis blocks always have an author.
        if let Some(a) = block.author {
            last_authors.insert(a);
        }
        block = store.get(block.parent)?;
    }

    let candidates: Vec<PartyId> = active.difference(&last_authors).copied().collect();
    let leader = pick(&candidates, r, pick_rule).unwrap_or_else(|| choose_leader_round_robin(r, n));
    Ok(Election { leader, path: ElectionPath::Reputation, candidates, excluded: last_authors })
}

fn pick(sorted: &[PartyId], r: RoundNumber, rule: PickRule) -> Option<PartyId> {
    if sorted.is_empty() {
        return None;
    }
    let idx = match rule {
        PickRule::RoundRobinOverCandidates => (r.0 % sorted.len() as u64) as usize,
        PickRule::LowestId => 0,
        PickRule::SeededHash => {
            let mut h = Fnv64::new();
            h.write(&r.0.to_le_bytes());
            (h.finish() % sorted.len() as u64) as usize
        }
    };
    Some(sorted[idx])
}
