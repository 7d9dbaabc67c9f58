//! Core domain types: parties, rounds, blocks, certificates and the block
//! store with implied-chain navigation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Index of a party in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Protocol round. Genesis lives in round 0; protocol rounds start at 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoundNumber(pub u64);

impl RoundNumber {
    pub const GENESIS: RoundNumber = RoundNumber(0);

    pub fn next(self) -> RoundNumber {
        RoundNumber(self.0 + 1)
    }
}

impl fmt::Display for RoundNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// 64-bit block digest. Serialized as a fixed-width hex string so that JSON
/// consumers without 64-bit integers read it losslessly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

impl BlockId {
    /// Stable FNV-1a digest of the fields that identify a block.
    pub fn derive(author: Option<PartyId>, round: RoundNumber, parent: BlockId, payload_size: u64) -> BlockId {
        let mut h = Fnv64::new();
        match author {
            Some(a) => {
                h.write(&[1]);
                h.write(&a.0.to_le_bytes());
            }
            None => h.write(&[0]),
        }
        h.write(&round.0.to_le_bytes());
        h.write(&parent.0.to_le_bytes());
        h.write(&payload_size.to_le_bytes());
        BlockId(h.finish())
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for BlockId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 16 {
            return Err(serde::de::Error::custom(format!("block id must be 16 hex digits, got {s:?}")));
        }
        u64::from_str_radix(&s, 16).map(BlockId).map_err(serde::de::Error::custom)
    }
}

pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Endorsement proof for a block: the round it was formed in and the set of
/// parties that endorsed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub endorsers: BTreeSet<PartyId>,
    pub round: RoundNumber,
}

/// Size of a certificate quorum for fault budget `f`.
pub fn quorum(f: usize) -> usize {
    2 * f + 1
}

/// A certified block. Fields are declared in lexicographic order so the
/// derived JSON form has sorted keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// `None` only for genesis.
    pub author: Option<PartyId>,
    pub certificate: Certificate,
    pub id: BlockId,
    pub parent: BlockId,
    pub payload_size: u64,
    pub round: RoundNumber,
}

impl Block {
    /// Genesis: round 0, author-less, its own parent, endorsed by every party.
    pub fn genesis(n: usize) -> Block {
        let id = BlockId::derive(None, RoundNumber::GENESIS, BlockId(0), 0);
        Block {
            author: None,
            certificate: Certificate { endorsers: (0..n as u32).map(PartyId).collect(), round: RoundNumber::GENESIS },
            id,
            parent: id,
            payload_size: 0,
            round: RoundNumber::GENESIS,
        }
    }

    pub fn new(
        author: PartyId,
        round: RoundNumber,
        parent: BlockId,
        payload_size: u64,
        endorsers: BTreeSet<PartyId>,
    ) -> Block {
        Block {
            author: Some(author),
            certificate: Certificate { endorsers, round },
            id: BlockId::derive(Some(author), round, parent, payload_size),
            parent,
            payload_size,
            round,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.author.is_none()
    }

    pub fn endorsers(&self) -> &BTreeSet<PartyId> {
        &self.certificate.endorsers
    }
}

/// `certified(B, r)`: the certificate is for round `r` and carries at least
/// `2f+1` endorsers.
pub fn certified(block: &Block, r: RoundNumber, f: usize) -> bool {
    block.certificate.round == r && block.certificate.endorsers.len() >= quorum(f)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block id collision on {0}")]
    Collision(BlockId),
    #[error("block {id} has round {round} but parent round {parent_round}")]
    NonIncreasingRound { id: BlockId, round: RoundNumber, parent_round: RoundNumber },
    #[error("block {id} certificate round {cert_round} differs from block round {round}")]
    CertificateRound { id: BlockId, round: RoundNumber, cert_round: RoundNumber },
    #[error("block {0} claims round 0 but is not genesis")]
    SecondGenesis(BlockId),
}

/// Store of certified blocks for one simulation. Single writer.
#[derive(Debug, Clone)]
pub struct BlockStore {
    blocks: BTreeMap<BlockId, Block>,
    genesis: BlockId,
}

impl BlockStore {
    pub fn new(n: usize) -> Self {
        let g = Block::genesis(n);
        let genesis = g.id;
        let mut blocks = BTreeMap::new();
        blocks.insert(genesis, g);
        BlockStore { blocks, genesis }
    }

    pub fn genesis_id(&self) -> BlockId {
        self.genesis
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[&self.genesis]
    }

    /// Inserts a block whose parent is already stored.
    ///
    /// Re-inserting an identical block is a no-op; a different block under
    /// the same id is a fatal collision.
    pub fn insert(&mut self, block: Block) -> Result<(), StoreError> {
        if let Some(existing) = self.blocks.get(&block.id) {
            if *existing == block {
                return Ok(());
            }
            return Err(StoreError::Collision(block.id));
        }
        if block.round == RoundNumber::GENESIS {
            return Err(StoreError::SecondGenesis(block.id));
        }
        if block.certificate.round != block.round {
            return Err(StoreError::CertificateRound {
                id: block.id,
                round: block.round,
                cert_round: block.certificate.round,
            });
        }
        let parent = self.blocks.get(&block.parent).ok_or(StoreError::UnknownBlock(block.parent))?;
        if parent.round >= block.round {
            return Err(StoreError::NonIncreasingRound {
                id: block.id,
                round: block.round,
                parent_round: parent.round,
            });
        }
        self.blocks.insert(block.id, block);
        Ok(())
    }

    pub fn get(&self, id: BlockId) -> Result<&Block, StoreError> {
        self.blocks.get(&id).ok_or(StoreError::UnknownBlock(id))
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    /// `ancestor ⟶ descendant`: `ancestor` lies on `descendant`'s implied
    /// chain. Reflexive.
    pub fn extends(&self, ancestor: BlockId, descendant: BlockId) -> Result<bool, StoreError> {
        let target = self.get(ancestor)?;
        let mut cur = self.get(descendant)?;
        loop {
            if cur.id == target.id {
                return Ok(true);
            }
            // Rounds strictly decrease along the chain, so stop early.
            if cur.round <= target.round || cur.is_genesis() {
                return Ok(false);
            }
            cur = self.get(cur.parent)?;
        }
    }

    /// Blocks from `head` down to genesis inclusive.
    pub fn implied_chain(&self, head: BlockId) -> Result<Vec<&Block>, StoreError> {
        let mut out = Vec::new();
        let mut cur = self.get(head)?;
        loop {
            out.push(cur);
            if cur.is_genesis() {
                return Ok(out);
            }
            cur = self.get(cur.parent)?;
        }
    }
}
