use serde::{Deserialize, Serialize};
use serde_json::Map;
use thiserror::Error;

use super::{BlockId, InvariantViolation, Karma, Millis, Nuance, Score, ScoreBlock};

/// A block to insert. The session fills in `id` before the edit is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<BlockId>,
    pub track: usize,
    pub start: Millis,
    pub duration: Millis,
    pub karma: Karma,
    pub nuance: Nuance,
}

/// A pure description of a change to a score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Edit {
    MoveBlock {
        target: BlockId,
        start: Millis,
        /// Moving to another lane is optional.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        track: Option<usize>,
    },
    ResizeBlock { target: BlockId, duration: Millis },
    SetKarma { target: BlockId, karma: Karma },
    SetNuance { target: BlockId, nuance: Nuance },
    AddBlock { block: NewBlock },
    DeleteBlock { target: BlockId },
    ReplaceScore { score: Score },
}

impl Edit {
    pub fn target(&self) -> Option<BlockId> {
        match self {
            Edit::MoveBlock { target, .. }
            | Edit::ResizeBlock { target, .. }
            | Edit::SetKarma { target, .. }
            | Edit::SetNuance { target, .. }
            | Edit::DeleteBlock { target } => Some(*target),
            Edit::AddBlock { block } => block.id,
            Edit::ReplaceScore { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EditError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block {block} would overlap block {other} on track {track}")]
    WouldOverlap { block: BlockId, other: BlockId, track: usize },
    #[error("block {block} would fall outside the score ({detail})")]
    OutOfRange { block: BlockId, detail: String },
    #[error("bad payload: {0}")]
    BadPayload(String),
}

impl From<InvariantViolation> for EditError {
    fn from(v: InvariantViolation) -> Self {
        match v {
            InvariantViolation::Overlap { block, other, track } => {
                EditError::WouldOverlap { block, other, track }
            }
            InvariantViolation::OutOfRange { block, .. } | InvariantViolation::TrackOutOfRange { block, .. } => {
                EditError::OutOfRange { block, detail: v.to_string() }
            }
            InvariantViolation::ZeroDuration { .. } | InvariantViolation::DuplicateId { .. } => {
                EditError::BadPayload(v.to_string())
            }
        }
    }
}

impl Score {
    /// Applies `edit`, returning the new score. On error `self` is untouched.
    pub fn apply_edit(&self, edit: &Edit) -> Result<Score, EditError> {
        if let Edit::ReplaceScore { score } = edit {
            let mut next = score.clone();
            next.normalize();
            next.check()?;
            return Ok(next);
        }

        let mut next = self.clone();
        match edit {
            Edit::AddBlock { block } => {
                let id = block.id.ok_or_else(|| {
                    EditError::BadPayload("AddBlock needs an id before it can be applied".into())
                })?;
                if block.duration == 0 {
                    return Err(EditError::BadPayload("block duration must be at least 1 ms".into()));
                }
                next.events.push(ScoreBlock {
                    id,
                    track: block.track,
                    start: block.start,
                    duration: block.duration,
                    karma: block.karma.clone(),
                    nuance: block.nuance,
                    extras: Map::new(),
                });
            }
            Edit::DeleteBlock { target } => {
                let pos = position(&next, *target)?;
                next.events.remove(pos);
            }
            Edit::MoveBlock { target, start, track } => {
                let pos = position(&next, *target)?;
                let b = &mut next.events[pos];
                b.start = *start;
                if let Some(track) = track {
                    b.track = *track;
                }
            }
            Edit::ResizeBlock { target, duration } => {
                if *duration == 0 {
                    return Err(EditError::BadPayload("block duration must be at least 1 ms".into()));
                }
                let pos = position(&next, *target)?;
                next.events[pos].duration = *duration;
            }
            Edit::SetKarma { target, karma } => {
                let pos = position(&next, *target)?;
                next.events[pos].karma = karma.clone();
            }
            Edit::SetNuance { target, nuance } => {
                let pos = position(&next, *target)?;
                next.events[pos].nuance = *nuance;
            }
            Edit::ReplaceScore { .. } => unreachable!(),
        }
        next.normalize();
        next.check()?;
        Ok(next)
    }
}

fn position(score: &Score, id: BlockId) -> Result<usize, EditError> {
    score.events.iter().position(|b| b.id == id).ok_or(EditError::UnknownBlock(id))
}
