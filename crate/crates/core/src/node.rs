//! Per-party SMR loop: on `new_round(r)` elect a leader from the commit
//! head, invoke LBR, and on return commit the returned block's uncommitted
//! ancestors if it extends the commit head.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, LeaderElector};
use crate::types::{Block, BlockId, BlockStore, PartyId, RoundNumber, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Alive,
    Crashed,
    Byzantine,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NodeError {
    #[error("party {0} already crashed")]
    AlreadyCrashed(PartyId),
    #[error("party {party} got round {round} after round {last}")]
    StaleRound { party: PartyId, round: RoundNumber, last: RoundNumber },
    #[error("party {0} is not running")]
    NotRunning(PartyId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub party: PartyId,
    pub commit_head: BlockId,
    /// Committed blocks in commit order, genesis excluded.
    pub committed_log: Vec<BlockId>,
    pub status: Status,
    pub last_round: RoundNumber,
}

impl NodeState {
    pub fn new(party: PartyId, genesis: BlockId, byzantine: bool) -> Self {
        NodeState {
            party,
            commit_head: genesis,
            committed_log: Vec::new(),
            status: if byzantine { Status::Byzantine } else { Status::Alive },
            last_round: RoundNumber::GENESIS,
        }
    }

    pub fn is_running(&self) -> bool {
        self.status != Status::Crashed
    }

    /// First half of the round handler: elect the leader to pass to LBR.
    pub fn on_new_round(
        &mut self,
        r: RoundNumber,
        elector: &LeaderElector,
        store: &BlockStore,
    ) -> Result<Election, NodeError> {
        if !self.is_running() {
            return Err(NodeError::NotRunning(self.party));
        }
        if r <= self.last_round {
            return Err(NodeError::StaleRound { party: self.party, round: r, last: self.last_round });
        }
        self.last_round = r;
        let head = store.get(self.commit_head)?;
        Ok(elector.choose_leader(r, head, store)?)
    }

    /// Second half: handle the LBR return value. Returns the newly committed
    /// blocks ancestor-first; empty when `commit_head ⟶ B` fails or `B` is
    /// the head itself.
    pub fn on_lbr_return<'a>(&mut self, block: BlockId, store: &'a BlockStore) -> Result<Vec<&'a Block>, NodeError> {
        if block == self.commit_head || !store.extends(self.commit_head, block)? {
            return Ok(Vec::new());
        }
        let mut fresh: Vec<&Block> = Vec::new();
        for b in store.implied_chain(block)? {
            if b.id == self.commit_head {
                break;
            }
            fresh.push(b);
        }
        fresh.reverse();
        self.committed_log.extend(fresh.iter().map(|b| b.id));
        self.commit_head = block;
        Ok(fresh)
    }

    pub fn crash(&mut self) -> Result<(), NodeError> {
        if self.status == Status::Crashed {
            return Err(NodeError::AlreadyCrashed(self.party));
        }
        self.status = Status::Crashed;
        Ok(())
    }
}
