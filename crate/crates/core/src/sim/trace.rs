use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ExecutionConfig, Time, FORMAT_VERSION};
use crate::election::ElectionPath;
use crate::types::{Block, BlockId, PartyId, RoundNumber};

/// One trace record. The `kind` tag comes first in the JSON form, followed
/// by the fields in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    NewRound {
        time: Time,
        party: PartyId,
        round: RoundNumber,
    },
    Elect {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        path: ElectionPath,
        candidates: Vec<PartyId>,
        excluded: Vec<PartyId>,
        leader: PartyId,
    },
    LbrStart {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        leader: PartyId,
        deadline: Time,
    },
    Endorse {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        author: PartyId,
        block: BlockId,
    },
    Certify {
        time: Time,
        party: PartyId,
        block: Block,
    },
    LbrReturn {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        leader: PartyId,
        start: Time,
        block: BlockId,
        block_round: RoundNumber,
        block_author: Option<PartyId>,
    },
    Commit {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        block: BlockId,
        block_round: RoundNumber,
        author: Option<PartyId>,
    },
    Crash {
        time: Time,
        party: PartyId,
        round: RoundNumber,
    },
    AdversaryAction {
        time: Time,
        party: PartyId,
        round: RoundNumber,
        action: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block: Option<BlockId>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        targets: Vec<PartyId>,
    },
}

impl Event {
    pub fn time(&self) -> Time {
        match self {
            Event::NewRound { time, .. }
            | Event::Elect { time, .. }
            | Event::LbrStart { time, .. }
            | Event::Endorse { time, .. }
            | Event::Certify { time, .. }
            | Event::LbrReturn { time, .. }
            | Event::Commit { time, .. }
            | Event::Crash { time, .. }
            | Event::AdversaryAction { time, .. } => *time,
        }
    }

    pub fn party(&self) -> PartyId {
        match self {
            Event::NewRound { party, .. }
            | Event::Elect { party, .. }
            | Event::LbrStart { party, .. }
            | Event::Endorse { party, .. }
            | Event::Certify { party, .. }
            | Event::LbrReturn { party, .. }
            | Event::Commit { party, .. }
            | Event::Crash { party, .. }
            | Event::AdversaryAction { party, .. } => *party,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::NewRound { .. } => "new_round",
            Event::Elect { .. } => "elect",
            Event::LbrStart { .. } => "lbr_start",
            Event::Endorse { .. } => "endorse",
            Event::Certify { .. } => "certify",
            Event::LbrReturn { .. } => "lbr_return",
            Event::Commit { .. } => "commit",
            Event::Crash { .. } => "crash",
            Event::AdversaryAction { .. } => "adversary_action",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    format_version: u32,
    config: ExecutionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: ExecutionConfig,
    pub events: Vec<Event>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty trace file")]
    Empty,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("first record must be a header, found {0:?}")]
    MissingHeader(String),
    #[error("unsupported trace format_version {0}")]
    FormatVersion(u32),
}

impl Trace {
    /// JSONL: a header record carrying the config, then one event per line.
    pub fn to_jsonl(&self) -> String {
        let header = Header { kind: "header".into(), format_version: FORMAT_VERSION, config: self.config.clone() };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("event serializes"));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: Header = serde_json::from_str(first).map_err(|source| TraceError::Parse { line: 1, source })?;
        if header.kind != "header" {
            return Err(TraceError::MissingHeader(header.kind));
        }
        if header.format_version != FORMAT_VERSION {
            return Err(TraceError::FormatVersion(header.format_version));
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let e: Event = serde_json::from_str(line).map_err(|source| TraceError::Parse { line: i + 1, source })?;
            events.push(e);
        }
        Ok(Trace { config: header.config, events })
    }
}
