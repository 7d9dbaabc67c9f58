use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AdversaryAction, ExecutionConfig, Time};
use super::network::delay_model;
use super::trace::{Event, Trace};
use super::SimError;
use crate::election::LeaderElector;
use crate::lbr::{self, LbrInvocation, Proposal};
use crate::node::NodeState;
use crate::pacemaker::Pacemaker;
use crate::types::{quorum, BlockId, BlockStore, PartyId, RoundNumber};

const STREAM_PACEMAKER: u64 = 1;
const STREAM_NETWORK: u64 = 2;
const STREAM_ADVERSARY: u64 = 3;

#[derive(Debug, Clone)]
enum Message {
    Proposal(Proposal),
    Endorse { round: RoundNumber, block: BlockId, from: PartyId },
    Certified(BlockId),
}

#[derive(Debug, Clone)]
enum Action {
    Deliver { to: PartyId, from: PartyId, msg: Message },
    Certify { leader: PartyId, round: RoundNumber },
    Deadline { party: PartyId, round: RoundNumber },
    NewRound { party: PartyId, round: RoundNumber },
    Reveal { party: PartyId, hider: PartyId, round: RoundNumber, block: BlockId },
}

impl Action {
    /// Same-time ordering: deliveries, then certification, then returns,
    /// then round starts, then post-start reveals.
    fn priority(&self) -> u8 {
        match self {
            Action::Deliver { .. } => 0,
            Action::Certify { .. } => 1,
            Action::Deadline { .. } => 2,
            Action::NewRound { .. } => 3,
            Action::Reveal { .. } => 4,
        }
    }

    fn party(&self) -> PartyId {
        match self {
            Action::Deliver { to, .. } => *to,
            Action::Certify { leader, .. } => *leader,
            Action::Deadline { party, .. } | Action::NewRound { party, .. } | Action::Reveal { party, .. } => *party,
        }
    }
}

struct Scheduled {
    time: Time,
    priority: u8,
    party: PartyId,
    seq: u64,
    action: Action,
}

impl Scheduled {
    fn key(&self) -> (Time, u8, PartyId, u64) {
        (self.time, self.priority, self.party, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Leading {
    proposal: Proposal,
    arrivals: Vec<(Time, PartyId)>,
    certify_scheduled: bool,
    done: bool,
}

struct Party {
    node: NodeState,
    byzantine: bool,
    crash_round: Option<RoundNumber>,
    /// Highest certified block this party knows.
    high: BlockId,
    active: Option<LbrInvocation>,
    endorsed: BTreeSet<RoundNumber>,
    buffered: Vec<Proposal>,
    leading: Option<Leading>,
}

pub(super) struct Engine<'c> {
    config: &'c ExecutionConfig,
    elector: LeaderElector,
    store: BlockStore,
    tip: BlockId,
    parties: Vec<Party>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    net_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    notify_at: BTreeMap<(PartyId, RoundNumber), Time>,
    events: Vec<Event>,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

impl<'c> Engine<'c> {
    pub(super) fn new(config: &'c ExecutionConfig) -> Result<Self, SimError> {
        config.validate()?;
        let store = BlockStore::new(config.n);
        let genesis = store.genesis_id();
        let parties = config
            .parties()
            .map(|p| Party {
                node: NodeState::new(p, genesis, config.is_byzantine(p)),
                byzantine: config.is_byzantine(p),
                crash_round: config.faults.crash_round(p),
                high: genesis,
                active: None,
                endorsed: BTreeSet::new(),
                buffered: Vec::new(),
                leading: None,
            })
            .collect();
        let mut engine = Engine {
            config,
            elector: LeaderElector::new(config.elector, config.n, config.f),
            store,
            tip: genesis,
            parties,
            queue: BinaryHeap::new(),
            seq: 0,
            net_rng: stream(config.seed, STREAM_NETWORK),
            adv_rng: stream(config.seed, STREAM_ADVERSARY),
            notify_at: BTreeMap::new(),
            events: Vec::new(),
        };

        let mut pm_rng = stream(config.seed, STREAM_PACEMAKER);
        let schedule = Pacemaker::new(config).schedule(config.horizon_rounds, &mut pm_rng)?;
        for note in schedule.into_iter().flatten() {
            engine.notify_at.insert((note.party, note.round), note.time);
            engine.push(note.time, Action::NewRound { party: note.party, round: note.round });
        }
        for c in &config.faults.crashes {
            if c.round == RoundNumber::GENESIS {
                engine.parties[c.party.index()].node.crash()?;
                engine.events.push(Event::Crash { time: 0, party: c.party, round: c.round });
            }
        }
        Ok(engine)
    }

    fn push(&mut self, time: Time, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled { time, priority: action.priority(), party: action.party(), seq: self.seq, action });
    }

    fn send(&mut self, now: Time, from: PartyId, to: PartyId, msg: Message) {
        let at = delay_model(from, to, now, &mut self.net_rng, self.config);
        self.push(at, Action::Deliver { to, from, msg });
    }

    pub(super) fn run(mut self) -> Result<Trace, SimError> {
        while let Some(s) = self.queue.pop() {
            let t = s.time;
            if !self.parties[s.party.index()].node.is_running() {
                continue;
            }
            match s.action {
                Action::NewRound { party, round } => self.on_new_round(party, round, t)?,
                Action::Deliver { to, from, msg } => self.on_deliver(to, from, msg, t)?,
                Action::Certify { leader, round } => self.on_certify(leader, round, t)?,
                Action::Deadline { party, round } => {
                    if self.parties[party.index()].active.as_ref().map(|i| i.round) == Some(round) {
                        self.finish_invocation(party, t)?;
                    }
                }
                Action::Reveal { party, hider, round, block } => {
                    self.events.push(Event::AdversaryAction {
                        time: t,
                        party: hider,
                        round,
                        action: "reveal".into(),
                        block: Some(block),
                        targets: vec![party],
                    });
                    self.learn(party, block, t)?;
                }
            }
        }
        Ok(Trace { config: self.config.clone(), events: self.events })
    }

    fn script_for(&self, party: PartyId, round: RoundNumber) -> impl Iterator<Item = &'c AdversaryAction> {
        self.config.adversary_script.iter().filter(move |a| {
            a.party() == party
                && match a {
                    AdversaryAction::HideReveal { round: r, .. }
                    | AdversaryAction::SelectiveDelivery { round: r, .. }
                    | AdversaryAction::WithholdProposal { round: r, .. } => *r == round,
                    AdversaryAction::RandomHideReveal { .. } | AdversaryAction::RandomSelectiveDelivery { .. } => true,
                }
        })
    }

    fn on_new_round(&mut self, p: PartyId, r: RoundNumber, t: Time) -> Result<(), SimError> {
        self.events.push(Event::NewRound { time: t, party: p, round: r });
        let election = self.parties[p.index()].node.on_new_round(r, &self.elector, &self.store)?;
        self.events.push(Event::Elect {
            time: t,
            party: p,
            round: r,
            path: election.path,
            candidates: election.candidates.clone(),
            excluded: election.excluded.iter().copied().collect(),
            leader: election.leader,
        });

        let mut leader = election.leader;
        if self.parties[p.index()].byzantine && leader != p && self.chosen_by_honest(p, r)? {
            leader = p;
        }
        let inv = LbrInvocation::new(p, r, leader, t, &self.config.timing);
        self.events.push(Event::LbrStart { time: t, party: p, round: r, leader, deadline: inv.deadline });
        self.push(inv.deadline, Action::Deadline { party: p, round: r });
        {
            let party = &mut self.parties[p.index()];
            party.active = Some(inv);
            party.leading = None;
        }

        if leader == p {
            self.propose(p, r, t)?;
        }

        let buffered = std::mem::take(&mut self.parties[p.index()].buffered);
        let (now, later): (Vec<_>, Vec<_>) = buffered.into_iter().filter(|b| b.round >= r).partition(|b| b.round == r);
        self.parties[p.index()].buffered = later;
        for prop in now {
            self.try_endorse(p, &prop, t);
        }
        Ok(())
    }

    /// Adversary omniscience: does any running honest party elect `b` at `r`?
    fn chosen_by_honest(&self, b: PartyId, r: RoundNumber) -> Result<bool, SimError> {
        for q in &self.parties {
            if q.byzantine || !q.node.is_running() {
                continue;
            }
            let head = self.store.get(q.node.commit_head)?;
            if self.elector.choose_leader(r, head, &self.store)?.leader == b {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn propose(&mut self, p: PartyId, r: RoundNumber, t: Time) -> Result<(), SimError> {
        let byzantine = self.parties[p.index()].byzantine;
        let mut recipients: Vec<PartyId> = self.config.parties().filter(|q| *q != p).collect();
        if byzantine {
            let script: Vec<&AdversaryAction> = self.script_for(p, r).collect();
            if script.iter().any(|a| matches!(a, AdversaryAction::WithholdProposal { .. })) {
                self.events.push(Event::AdversaryAction {
                    time: t,
                    party: p,
                    round: r,
                    action: "withhold_proposal".into(),
                    block: None,
                    targets: Vec::new(),
                });
                return Ok(());
            }
            let explicit = script.iter().find_map(|a| match a {
                AdversaryAction::SelectiveDelivery { recipients, .. } => Some(recipients.clone()),
                _ => None,
            });
            let random = script.iter().any(|a| matches!(a, AdversaryAction::RandomSelectiveDelivery { .. }));
            let chosen = match explicit {
                Some(set) => Some(set),
                None if random => {
                    let mut honest: Vec<PartyId> =
                        recipients.iter().copied().filter(|q| !self.config.is_byzantine(*q)).collect();
                    honest.shuffle(&mut self.adv_rng);
                    let k = self.adv_rng.gen_range(0..=honest.len());
                    let mut set: BTreeSet<PartyId> = honest.into_iter().take(k).collect();
                    set.extend(self.config.faults.byzantine.iter().copied());
                    Some(set)
                }
                None => None,
            };
            if let Some(set) = chosen {
                recipients.retain(|q| set.contains(q));
                self.events.push(Event::AdversaryAction {
                    time: t,
                    party: p,
                    round: r,
                    action: "selective_delivery".into(),
                    block: None,
                    targets: recipients.clone(),
                });
            }
        }

        let proposal = Proposal::new(p, r, self.tip, self.config.payload_size);
        self.parties[p.index()].endorsed.insert(r);
        self.events.push(Event::Endorse { time: t, party: p, round: r, author: p, block: proposal.id });
        self.parties[p.index()].leading =
            Some(Leading { proposal: proposal.clone(), arrivals: vec![(t, p)], certify_scheduled: false, done: false });
        self.maybe_schedule_certify(p, r, t);
        for q in recipients {
            self.send(t, p, q, Message::Proposal(proposal.clone()));
        }
        Ok(())
    }

    fn maybe_schedule_certify(&mut self, p: PartyId, r: RoundNumber, t: Time) {
        let q = quorum(self.config.f);
        if let Some(l) = self.parties[p.index()].leading.as_mut() {
            if !l.certify_scheduled && !l.done && l.arrivals.len() >= q {
                l.certify_scheduled = true;
                self.push(t, Action::Certify { leader: p, round: r });
            }
        }
    }

    fn try_endorse(&mut self, q: PartyId, prop: &Proposal, t: Time) {
        let party = &self.parties[q.index()];
        let already = party.endorsed.contains(&prop.round);
        let parent = self.store.get(prop.parent).ok();
        let known_round = self.store.get(party.high).map(|b| b.round).unwrap_or_default();
        let colluding = party.byzantine && self.config.is_byzantine(prop.author);
        let ok = if colluding {
            let active_round = party.active.as_ref().map(|i| i.round);
            !already && active_round == Some(prop.round) && parent.is_some_and(|b| b.round < prop.round)
        } else {
            lbr::may_endorse(party.active.as_ref(), prop, already, parent, known_round)
        };
        if !ok {
            return;
        }
        self.parties[q.index()].endorsed.insert(prop.round);
        self.events.push(Event::Endorse { time: t, party: q, round: prop.round, author: prop.author, block: prop.id });
        self.send(t, q, prop.author, Message::Endorse { round: prop.round, block: prop.id, from: q });
    }

    fn on_deliver(&mut self, to: PartyId, _from: PartyId, msg: Message, t: Time) -> Result<(), SimError> {
        match msg {
            Message::Proposal(prop) => {
                let party = &mut self.parties[to.index()];
                if prop.round > party.node.last_round {
                    party.buffered.push(prop);
                } else {
                    self.try_endorse(to, &prop, t);
                }
            }
            Message::Endorse { round, block, from } => {
                let party = &mut self.parties[to.index()];
                let active = party.active.as_ref().is_some_and(|i| i.round == round);
                if let Some(l) = party.leading.as_mut() {
                    if active && !l.done && l.proposal.id == block {
                        l.arrivals.push((t, from));
                        self.maybe_schedule_certify(to, round, t);
                    }
                }
            }
            Message::Certified(id) => self.learn(to, id, t)?,
        }
        Ok(())
    }

    fn on_certify(&mut self, leader: PartyId, round: RoundNumber, t: Time) -> Result<(), SimError> {
        let f = self.config.f;
        let party = &mut self.parties[leader.index()];
        if party.active.as_ref().map(|i| i.round) != Some(round) {
            return Ok(());
        }
        let Some(l) = party.leading.as_mut() else { return Ok(()) };
        if l.done {
            return Ok(());
        }
        l.done = true;
        let Some(endorsers) = lbr::select_endorsers(&l.arrivals, f) else { return Ok(()) };
        let block = l.proposal.certify(endorsers);

        // Certified blocks form one chain: a block is certified only on top
        // of the current tip and never twice in a round.
        let tip_round = self.store.get(self.tip)?.round;
        if block.parent != self.tip || tip_round >= round {
            return Ok(());
        }
        let id = block.id;
        self.store.insert(block.clone())?;
        self.tip = id;
        self.events.push(Event::Certify { time: t, party: leader, block: block.clone() });

        let hide = if self.parties[leader.index()].byzantine { self.hide_plan(leader, round)? } else { None };
        match hide {
            Some(plan) => {
                let schedule = lbr::adversary_hide_reveal(&block, leader, &plan, self.config)?;
                self.events.push(Event::AdversaryAction {
                    time: t,
                    party: leader,
                    round,
                    action: "hide".into(),
                    block: Some(id),
                    targets: schedule.reveals.keys().copied().collect(),
                });
                for (target, at) in schedule.reveals {
                    let when = if at == round { Some(t) } else { self.notify_at.get(&(target, at)).copied() };
                    if let Some(when) = when {
                        self.push(when, Action::Reveal { party: target, hider: leader, round: at, block: id });
                    }
                }
            }
            None => {
                for q in self.config.parties().filter(|q| *q != leader) {
                    self.send(t, leader, q, Message::Certified(id));
                }
            }
        }
        self.learn(leader, id, t)
    }

    fn hide_plan(
        &mut self,
        leader: PartyId,
        round: RoundNumber,
    ) -> Result<Option<BTreeMap<PartyId, RoundNumber>>, SimError> {
        let script: Vec<&AdversaryAction> = self.script_for(leader, round).collect();
        if let Some(plan) = script.iter().find_map(|a| match a {
            AdversaryAction::HideReveal { reveal, .. } => Some(reveal.clone()),
            _ => None,
        }) {
            return Ok(Some(plan));
        }
        let Some(max_delay) = script.iter().find_map(|a| match a {
            AdversaryAction::RandomHideReveal { max_delay_rounds, .. } => Some(*max_delay_rounds),
            _ => None,
        }) else {
            return Ok(None);
        };
        let targets: Vec<PartyId> = self
            .config
            .parties()
            .filter(|q| !self.config.is_byzantine(*q) && self.parties[q.index()].node.is_running())
            .collect();
        let mut plan = BTreeMap::new();
        for q in targets {
            let d = self.adv_rng.gen_range(0..=max_delay);
            plan.insert(q, RoundNumber(round.0 + d));
        }
        Ok(Some(plan))
    }

    /// A certified block reaches `q`, by broadcast or by reveal.
    fn learn(&mut self, q: PartyId, id: BlockId, t: Time) -> Result<(), SimError> {
        let block = self.store.get(id)?;
        let (round, author) = (block.round, block.author);
        let party = &mut self.parties[q.index()];
        if round > self.store.get(party.high)?.round {
            party.high = id;
        }
        let completes = party.active.as_ref().is_some_and(|i| i.round == round && author == Some(i.leader));
        if completes {
            self.finish_invocation(q, t)?;
        }
        Ok(())
    }

    fn finish_invocation(&mut self, q: PartyId, t: Time) -> Result<(), SimError> {
        let party = &mut self.parties[q.index()];
        let Some(inv) = party.active.take() else { return Ok(()) };
        party.leading = None;
        let block = lbr::return_value(&self.store, party.high, &inv)?;
        self.events.push(Event::LbrReturn {
            time: t,
            party: q,
            round: inv.round,
            leader: inv.leader,
            start: inv.start_time,
            block: block.id,
            block_round: block.round,
            block_author: block.author,
        });
        let committed = party.node.on_lbr_return(block.id, &self.store)?;
        for b in committed {
            self.events.push(Event::Commit {
                time: t,
                party: q,
                round: inv.round,
                block: b.id,
                block_round: b.round,
                author: b.author,
            });
        }
        if party.crash_round == Some(inv.round) {
            party.node.crash()?;
            party.buffered.clear();
            self.events.push(Event::Crash { time: t, party: q, round: inv.round });
        }
        Ok(())
    }
}
