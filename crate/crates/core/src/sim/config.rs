use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::ElectorConfig;
use crate::lbr::TimingConstants;
use crate::types::{PartyId, RoundNumber};

pub const FORMAT_VERSION: u32 = 1;

/// Simulated time in integer nanosecond ticks.
pub type Time = u64;

pub const DEFAULT_DELTA: Time = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashEntry {
    pub party: PartyId,
    /// Last round the party invokes LBR in. Round 0 means it never runs.
    pub round: RoundNumber,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSchedule {
    #[serde(default)]
    pub crashes: Vec<CrashEntry>,
    #[serde(default)]
    pub byzantine: BTreeSet<PartyId>,
}

impl FaultSchedule {
    pub fn none() -> Self {
        FaultSchedule::default()
    }

    pub fn is_crash_only(&self) -> bool {
        self.byzantine.is_empty()
    }

    pub fn crash_round(&self, p: PartyId) -> Option<RoundNumber> {
        self.crashes.iter().find(|c| c.party == p).map(|c| c.round)
    }

    /// Adds `crash(party, round)`; a second crash of the same party is rejected.
    pub fn crash(&mut self, party: PartyId, round: RoundNumber) -> Result<(), ConfigError> {
        if self.crash_round(party).is_some() {
            return Err(ConfigError::DoubleCrash(party));
        }
        self.crashes.push(CrashEntry { party, round });
        Ok(())
    }
}

/// Closed vocabulary of Byzantine behaviours. The explicit-round actions
/// apply to one round; the `random_*` strategies apply to every round in
/// which the party leads, drawing choices from the adversary RNG stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AdversaryAction {
    HideReveal {
        party: PartyId,
        round: RoundNumber,
        /// Round at which each honest party learns the hidden block.
        #[serde(default, with = "reveal_list")]
        reveal: BTreeMap<PartyId, RoundNumber>,
    },
    SelectiveDelivery {
        party: PartyId,
        round: RoundNumber,
        recipients: BTreeSet<PartyId>,
    },
    WithholdProposal {
        party: PartyId,
        round: RoundNumber,
    },
    RandomHideReveal {
        party: PartyId,
        max_delay_rounds: u64,
    },
    RandomSelectiveDelivery {
        party: PartyId,
    },
}

/// Internally tagged enums buffer map keys as strings, which breaks integer
/// keys on the way back in; the plan is written as `[{party, round}]`.
mod reveal_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::types::{PartyId, RoundNumber};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        party: PartyId,
        round: RoundNumber,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<PartyId, RoundNumber>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map.iter().map(|(&party, &round)| Entry { party, round }).collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<PartyId, RoundNumber>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (e.party, e.round)).collect())
    }
}

impl AdversaryAction {
    pub fn party(&self) -> PartyId {
        match self {
            AdversaryAction::HideReveal { party, .. }
            | AdversaryAction::SelectiveDelivery { party, .. }
            | AdversaryAction::WithholdProposal { party, .. }
            | AdversaryAction::RandomHideReveal { party, .. }
            | AdversaryAction::RandomSelectiveDelivery { party } => *party,
        }
    }
}

/// Fixed delay for one directed link. Applied exactly before GST and capped
/// at δ after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDelay {
    pub from: PartyId,
    pub to: PartyId,
    pub delay: Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub n: usize,
    pub f: usize,
    #[serde(default)]
    pub gst: Time,
    #[serde(default)]
    pub timing: TimingConstants,
    pub horizon_rounds: u64,
    pub elector: ElectorConfig,
    #[serde(default)]
    pub faults: FaultSchedule,
    #[serde(default)]
    pub adversary_script: Vec<AdversaryAction>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pre_gst_skew")]
    pub pre_gst_max_skew: Time,
    /// Abstract transactions per block.
    #[serde(default = "default_payload")]
    pub payload_size: u64,
    /// Per-round notification offsets (one per party) overriding the seeded jitter.
    #[serde(default)]
    pub pacemaker_overrides: BTreeMap<RoundNumber, Vec<Time>>,
    #[serde(default)]
    pub link_delays: Vec<LinkDelay>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

fn default_pre_gst_skew() -> Time {
    5 * DEFAULT_DELTA
}

fn default_payload() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n must be positive")]
    NoParties,
    #[error("fault budget f={f} needs n = 3f+1 parties, got n={n}")]
    FaultBudget { n: usize, f: usize },
    #[error("{faulty} faulty parties exceed the budget f={f}")]
    TooManyFaults { faulty: usize, f: usize },
    #[error("party {0} is outside the party set")]
    UnknownParty(PartyId),
    #[error("party {0} is crashed twice")]
    DoubleCrash(PartyId),
    #[error("party {0} is both crashing and Byzantine")]
    CrashAndByzantine(PartyId),
    #[error("adversary action for non-Byzantine party {0}")]
    HonestAdversary(PartyId),
    #[error("timing: {0}")]
    Timing(String),
    #[error("horizon must be at least one round")]
    EmptyHorizon,
    #[error("pacemaker override for round {round}: {reason}")]
    PacemakerOverride { round: RoundNumber, reason: String },
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
}

impl ExecutionConfig {
    /// Default happy-path configuration for `n` parties with maximal `f`.
    pub fn new(n: usize, elector: ElectorConfig, horizon_rounds: u64, seed: u64) -> Self {
        ExecutionConfig {
            format_version: FORMAT_VERSION,
            n,
            f: n.saturating_sub(1) / 3,
            gst: 0,
            timing: TimingConstants::default(),
            horizon_rounds,
            elector,
            faults: FaultSchedule::none(),
            adversary_script: Vec::new(),
            seed,
            pre_gst_max_skew: default_pre_gst_skew(),
            payload_size: default_payload(),
            pacemaker_overrides: BTreeMap::new(),
            link_delays: Vec::new(),
        }
    }

    pub fn parties(&self) -> impl Iterator<Item = PartyId> {
        (0..self.n as u32).map(PartyId)
    }

    pub fn is_byzantine(&self, p: PartyId) -> bool {
        self.faults.byzantine.contains(&p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ConfigError::FormatVersion(self.format_version));
        }
        if self.n == 0 {
            return Err(ConfigError::NoParties);
        }
        // Two disjoint 2f+1 quorums exist once n > 3f+1, so a round could
        // certify two blocks and Progress would no longer hold.
        if 3 * self.f + 1 != self.n {
            return Err(ConfigError::FaultBudget { n: self.n, f: self.f });
        }
        if self.horizon_rounds == 0 {
            return Err(ConfigError::EmptyHorizon);
        }
        self.timing.validate().map_err(ConfigError::Timing)?;

        let check = |p: PartyId| {
            if p.index() >= self.n {
                Err(ConfigError::UnknownParty(p))
            } else {
                Ok(())
            }
        };
        let mut crashed = BTreeSet::new();
        for c in &self.faults.crashes {
            check(c.party)?;
            if !crashed.insert(c.party) {
                return Err(ConfigError::DoubleCrash(c.party));
            }
            if self.faults.byzantine.contains(&c.party) {
                return Err(ConfigError::CrashAndByzantine(c.party));
            }
        }
        for b in &self.faults.byzantine {
            check(*b)?;
        }
        let faulty = crashed.len() + self.faults.byzantine.len();
        if faulty > self.f {
            return Err(ConfigError::TooManyFaults { faulty, f: self.f });
        }
        for a in &self.adversary_script {
            check(a.party())?;
            if !self.is_byzantine(a.party()) {
                return Err(ConfigError::HonestAdversary(a.party()));
            }
            match a {
                AdversaryAction::HideReveal { reveal, .. } => {
                    for p in reveal.keys() {
                        check(*p)?;
                    }
                }
                AdversaryAction::SelectiveDelivery { recipients, .. } => {
                    for p in recipients {
                        check(*p)?;
                    }
                }
                _ => {}
            }
        }
        for l in &self.link_delays {
            check(l.from)?;
            check(l.to)?;
        }
        for (round, offsets) in &self.pacemaker_overrides {
            if offsets.len() != self.n {
                return Err(ConfigError::PacemakerOverride {
                    round: *round,
                    reason: format!("expected {} offsets, got {}", self.n, offsets.len()),
                });
            }
        }
        Ok(())
    }
}
