//! Round synchronization. Produces `new_round(r)` notifications: after GST
//! all notifications of a round fall within δ of each other and the next
//! round starts no earlier than the last notification plus `Δ_p`. Before
//! GST the skew is seeded jitter up to `pre_gst_max_skew`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::config::{ConfigError, ExecutionConfig, Time};
use crate::types::{PartyId, RoundNumber};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundNotification {
    pub party: PartyId,
    pub round: RoundNumber,
    pub time: Time,
}

#[derive(Debug, Clone)]
pub struct Pacemaker {
    n: usize,
    gst: Time,
    delta: Time,
    spacing: Time,
    pre_gst_max_skew: Time,
    /// Last round each party is notified of; `None` = never crashes.
    last_round: Vec<Option<RoundNumber>>,
    overrides: BTreeMap<RoundNumber, Vec<Time>>,
    next_base: Time,
    next_round: RoundNumber,
}

impl Pacemaker {
    pub fn new(config: &ExecutionConfig) -> Self {
        let mut last_round = vec![None; config.n];
        for c in &config.faults.crashes {
            last_round[c.party.index()] = Some(c.round);
        }
        Pacemaker {
            n: config.n,
            gst: config.gst,
            delta: config.timing.delta,
            spacing: config.timing.pacemaker_spacing,
            pre_gst_max_skew: config.pre_gst_max_skew,
            last_round,
            overrides: config.pacemaker_overrides.clone(),
            next_base: 0,
            next_round: RoundNumber(1),
        }
    }

    fn receives(&self, p: usize, r: RoundNumber) -> bool {
        self.last_round[p].is_none_or(|last| r <= last)
    }

    /// Notifications for the next round in sequence (rounds are scheduled
    /// strictly in order, starting at 1). Parties that crashed before `r`
    /// receive nothing.
    pub fn schedule_round<R: Rng>(&mut self, rng: &mut R) -> Result<Vec<RoundNotification>, ConfigError> {
        let r = self.next_round;
        let base = self.next_base;
        let post_gst = base >= self.gst;
        let max_skew = if post_gst { self.delta } else { self.pre_gst_max_skew };

        // Draw for every party so the stream does not depend on the fault plan.
        let drawn: Vec<Time> = (0..self.n).map(|_| rng.gen_range(0..=max_skew)).collect();
        let offsets = match self.overrides.get(&r) {
            Some(o) => o.clone(),
            None => drawn,
        };

        let alive: Vec<usize> = (0..self.n).filter(|&p| self.receives(p, r)).collect();
        let min = alive.iter().map(|&p| offsets[p]).min().unwrap_or(0);
        let notes: Vec<RoundNotification> = alive
            .iter()
            .map(|&p| RoundNotification { party: PartyId(p as u32), round: r, time: base + offsets[p] - min })
            .collect();

        if post_gst {
            let spread = notes.iter().map(|n| n.time).max().unwrap_or(base) - base;
            if spread > self.delta {
                return Err(ConfigError::PacemakerOverride {
                    round: r,
                    reason: format!("post-GST skew {spread} exceeds delta {}", self.delta),
                });
            }
        }

        let last = notes.iter().map(|n| n.time).max().unwrap_or(base);
        self.next_base = last + self.spacing;
        self.next_round = r.next();
        Ok(notes)
    }

    /// Full schedule for rounds `1..=horizon`, indexed by `round - 1`.
    pub fn schedule<R: Rng>(&mut self, horizon: u64, rng: &mut R) -> Result<Vec<Vec<RoundNotification>>, ConfigError> {
        (0..horizon).map(|_| self.schedule_round(rng)).collect()
    }
}
