//! The score document: tracks, timed blocks and their invariants.
//!
//! Score time is integer milliseconds. A block occupies the half-open
//! interval `[start, start + duration)`, so two blocks meeting at a boundary
//! neither overlap nor sound together.

mod document;
mod edit;
mod index;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

pub use document::{parse_document, parse_score, serialize_score, DocumentError};
pub use edit::{Edit, EditError, NewBlock};
pub use index::{active_events, TimelineIndex};

/// Score time in milliseconds.
pub type Millis = u64;

pub const FORMAT_VERSION: u32 = 1;

/// Musical dynamics, ordered from softest to loudest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nuance {
    Ppp,
    Pp,
    P,
    Mp,
    Mf,
    F,
    Ff,
    Fff,
}

impl Nuance {
    pub const ALL: [Nuance; 8] = [
        Nuance::Ppp,
        Nuance::Pp,
        Nuance::P,
        Nuance::Mp,
        Nuance::Mf,
        Nuance::F,
        Nuance::Ff,
        Nuance::Fff,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Nuance> {
        Self::ALL.get(ordinal as usize).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Nuance::Ppp => "ppp",
            Nuance::Pp => "pp",
            Nuance::P => "p",
            Nuance::Mp => "mp",
            Nuance::Mf => "mf",
            Nuance::F => "f",
            Nuance::Ff => "ff",
            Nuance::Fff => "fff",
        }
    }
}

impl fmt::Display for Nuance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown nuance {0:?} (expected one of ppp, pp, p, mp, mf, f, ff, fff)")]
pub struct UnknownNuance(pub String);

impl FromStr for Nuance {
    type Err = UnknownNuance;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.symbol() == s)
            .ok_or_else(|| UnknownNuance(s.to_string()))
    }
}

impl Serialize for Nuance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Nuance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A mood label from the ensemble's vocabulary.
///
/// Labels are non-empty and contain neither whitespace nor `/`, so they can be
/// embedded in OSC addresses and file names.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Karma(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid karma label {0:?}: must be non-empty without whitespace or '/'")]
pub struct InvalidKarma(pub String);

impl Karma {
    pub fn new(label: impl Into<String>) -> Result<Self, InvalidKarma> {
        let label = label.into();
        if label.is_empty() || label.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(InvalidKarma(label));
        }
        Ok(Karma(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Karma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Karma {
    type Err = InvalidKarma;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Karma::new(s)
    }
}

impl Serialize for Karma {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Karma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Karma::new(s).map_err(serde::de::Error::custom)
    }
}

/// 128-bit block identifier, written as 32 lowercase hex characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u128);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid block id {0:?}: expected 32 lowercase hex characters")]
pub struct InvalidBlockId(pub String);

impl BlockId {
    pub fn from_halves(high: u64, low: u64) -> Self {
        BlockId(((high as u128) << 64) | low as u128)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for BlockId {
    type Err = InvalidBlockId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !ok {
            return Err(InvalidBlockId(s.to_string()));
        }
        u128::from_str_radix(s, 16)
            .map(BlockId)
            .map_err(|_| InvalidBlockId(s.to_string()))
    }
}

impl Serialize for BlockId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One event on the timeline.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreBlock {
    pub id: BlockId,
    pub track: usize,
    pub start: Millis,
    pub duration: Millis,
    pub karma: Karma,
    pub nuance: Nuance,
    /// Properties other than karma and nuance, carried through untouched.
    pub extras: Map<String, Value>,
}

impl ScoreBlock {
    /// Exclusive end. Saturates for corrupted blocks whose end would not fit.
    pub fn end(&self) -> Millis {
        self.start.saturating_add(self.duration)
    }

    pub fn is_active_at(&self, t: Millis) -> bool {
        self.start <= t && t < self.end()
    }

    fn sort_key(&self) -> (Millis, usize, BlockId) {
        (self.start, self.track, self.id)
    }
}

/// The shared document.
///
/// Fields are public so that tooling can hold scores that break the
/// invariants (for instance when validating a hand-edited file); the
/// checked constructors are [`parse_score`], [`Score::new`] and
/// [`Score::apply_edit`].
#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    pub version: u32,
    pub tracks: Vec<String>,
    pub duration: Millis,
    /// Kept in canonical order `(start, track, id)`.
    pub events: Vec<ScoreBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvariantKind {
    TrackOutOfRange,
    OutOfRange,
    ZeroDuration,
    Overlap,
    DuplicateId,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("block {block}: track index {track} is not below the track count {tracks}")]
    TrackOutOfRange { block: BlockId, track: usize, tracks: usize },
    #[error("block {block}: [{start}, {end}) exceeds the score duration {duration}")]
    OutOfRange { block: BlockId, start: Millis, end: u128, duration: Millis },
    #[error("block {block}: duration must be at least 1 ms")]
    ZeroDuration { block: BlockId },
    #[error("block {block} overlaps block {other} on track {track}")]
    Overlap { block: BlockId, other: BlockId, track: usize },
    #[error("duplicate block id {block}")]
    DuplicateId { block: BlockId },
}

impl Score {
    pub fn empty() -> Self {
        Score { version: FORMAT_VERSION, tracks: Vec::new(), duration: 0, events: Vec::new() }
    }

    /// Builds a score, normalizing event order and checking every invariant.
    pub fn new(
        tracks: Vec<String>,
        duration: Millis,
        events: Vec<ScoreBlock>,
    ) -> Result<Self, InvariantViolation> {
        let mut score = Score { version: FORMAT_VERSION, tracks, duration, events };
        score.normalize();
        score.check()?;
        Ok(score)
    }

    pub fn normalize(&mut self) {
        self.events.sort_by_key(ScoreBlock::sort_key);
    }

    pub fn block(&self, id: BlockId) -> Option<&ScoreBlock> {
        self.events.iter().find(|b| b.id == id)
    }

    /// Returns the first invariant violation found, if any.
    pub fn check(&self) -> Result<(), InvariantViolation> {
        let mut seen = HashSet::with_capacity(self.events.len());
        let mut by_track: BTreeMap<usize, Vec<&ScoreBlock>> = BTreeMap::new();
        for block in &self.events {
            if !seen.insert(block.id) {
                return Err(InvariantViolation::DuplicateId { block: block.id });
            }
            if block.duration == 0 {
                return Err(InvariantViolation::ZeroDuration { block: block.id });
            }
            if block.track >= self.tracks.len() {
                return Err(InvariantViolation::TrackOutOfRange {
                    block: block.id,
                    track: block.track,
                    tracks: self.tracks.len(),
                });
            }
            let end = block.start as u128 + block.duration as u128;
            if end > self.duration as u128 {
                return Err(InvariantViolation::OutOfRange {
                    block: block.id,
                    start: block.start,
                    end,
                    duration: self.duration,
                });
            }
            by_track.entry(block.track).or_default().push(block);
        }
        for (track, mut blocks) in by_track {
            blocks.sort_by_key(|b| (b.start, b.id));
            for pair in blocks.windows(2) {
                if pair[1].start < pair[0].end() {
                    return Err(InvariantViolation::Overlap {
                        block: pair[1].id,
                        other: pair[0].id,
                        track,
                    });
                }
            }
        }
        Ok(())
    }
}

impl Default for Score {
    fn default() -> Self {
        Score::empty()
    }
}
