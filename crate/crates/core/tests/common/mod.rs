//! Scenario builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use carousel_core::election::ElectorConfig;
use carousel_core::sim::{AdversaryAction, ExecutionConfig};
use carousel_core::types::{PartyId, RoundNumber};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ROUND_TICKS: u64 = 40_000_000;

pub fn happy(n: usize, elector: ElectorConfig, horizon: u64, seed: u64) -> ExecutionConfig {
    ExecutionConfig::new(n, elector, horizon, seed)
}

/// Scenario-level RNG, independent of the simulator's own streams.
pub fn scenario_rng(tag: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed)
}

/// GST a few rounds in, so every run has an asynchronous prefix.
pub fn with_gst(mut c: ExecutionConfig, rounds: u64) -> ExecutionConfig {
    c.gst = rounds * ROUND_TICKS;
    c
}

/// Crash `k` random parties at random rounds in `[lo, hi]`.
pub fn crash_random(mut c: ExecutionConfig, k: usize, lo: u64, hi: u64, rng: &mut ChaCha8Rng) -> ExecutionConfig {
    let mut parties: Vec<PartyId> = c.parties().collect();
    parties.shuffle(rng);
    for p in parties.into_iter().take(k) {
        let r = rng.gen_range(lo..=hi);
        c.faults.crash(p, RoundNumber(r)).unwrap();
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    /// Byzantine parties follow the protocol (but collude on endorsements).
    Silent,
    HideReveal,
    Selective,
    Withhold,
    Mixed,
}

pub const SCRIPTS: [Script; 5] =
    [Script::Silent, Script::HideReveal, Script::Selective, Script::Withhold, Script::Mixed];

/// `f` random Byzantine parties running `script`.
pub fn byzantine(mut c: ExecutionConfig, script: Script, rng: &mut ChaCha8Rng) -> ExecutionConfig {
    let mut parties: Vec<PartyId> = c.parties().collect();
    parties.shuffle(rng);
    let byz: Vec<PartyId> = parties.into_iter().take(c.f).collect();
    for &b in &byz {
        c.faults.byzantine.insert(b);
    }
    let horizon = c.horizon_rounds;
    for (i, &b) in byz.iter().enumerate() {
        let max_delay_rounds = rng.gen_range(0..=5);
        match script {
            Script::Silent => {}
            Script::HideReveal => {
                c.adversary_script.push(AdversaryAction::RandomHideReveal { party: b, max_delay_rounds })
            }
            Script::Selective => c.adversary_script.push(AdversaryAction::RandomSelectiveDelivery { party: b }),
            Script::Withhold => {
                for _ in 0..horizon / 4 {
                    let round = RoundNumber(rng.gen_range(1..=horizon));
                    c.adversary_script.push(AdversaryAction::WithholdProposal { party: b, round });
                }
            }
            Script::Mixed => {
                let action = if i % 2 == 0 {
                    AdversaryAction::RandomHideReveal { party: b, max_delay_rounds }
                } else {
                    AdversaryAction::RandomSelectiveDelivery { party: b }
                };
                c.adversary_script.push(action);
                if i == 0 {
                    c.adversary_script.push(AdversaryAction::RandomSelectiveDelivery { party: b });
                }
            }
        }
    }
    c
}

/// Mixed corpus over n ∈ {4, 7, 10}: happy, crash-only and every Byzantine
/// script, both electors, with and without an asynchronous prefix.
pub fn corpus(per_cell: u64) -> Vec<(String, ExecutionConfig)> {
    let mut out = Vec::new();
    for n in [4usize, 7, 10] {
        for elector in [ElectorConfig::carousel(), ElectorConfig::round_robin()] {
            for seed in 0..per_cell {
                let mut rng = scenario_rng(n as u64, seed);
                let horizon = 60;
                let gst = if seed % 2 == 0 { 0 } else { rng.gen_range(1..=10) };
                let base = with_gst(happy(n, elector, horizon, seed), gst);
                let name = |kind: &str| format!("n{n}/{}/{kind}/seed{seed}", elector.name());
                out.push((name("happy"), base.clone()));
                let f = base.f;
                out.push((name("crash"), crash_random(base.clone(), f, 0, horizon, &mut rng)));
                for script in SCRIPTS {
                    out.push((name(&format!("{script:?}").to_lowercase()), byzantine(base.clone(), script, &mut rng)));
                }
            }
        }
    }
    out
}
