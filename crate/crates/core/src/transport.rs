//! The shared playhead.
//!
//! Position is derived from an anchor: `anchor + elapsed_wall * speed`, one
//! multiplication from the last re-anchoring, so advancing in many small
//! steps lands exactly where one large step does. Boundary crossings are
//! computed on whole milliseconds (`floor(playhead)`), which is also the
//! instant the active set refers to.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{BlockId, Millis, Score, ScoreBlock, TimelineIndex};

pub const MIN_SPEED: f64 = 0.1;
pub const MAX_SPEED: f64 = 10.0;

/// A notification produced by the transport.
#[derive(Clone, Debug, PartialEq)]
pub enum Emission {
    End { at: Millis, block: ScoreBlock },
    Begin { at: Millis, block: ScoreBlock },
    Tick { at: Millis },
    Stopped { at: Millis },
}

impl Emission {
    pub fn at(&self) -> Millis {
        match self {
            Emission::End { at, .. }
            | Emission::Begin { at, .. }
            | Emission::Tick { at }
            | Emission::Stopped { at } => *at,
        }
    }

    pub fn block(&self) -> Option<&ScoreBlock> {
        match self {
            Emission::End { block, .. } | Emission::Begin { block, .. } => Some(block),
            _ => None,
        }
    }

    /// Ordering within a batch: by time, then End < Begin < Tick < Stopped,
    /// then by track and id.
    fn sort_key(&self) -> (Millis, u8, usize, BlockId) {
        let (rank, block) = match self {
            Emission::End { block, .. } => (0, Some(block)),
            Emission::Begin { block, .. } => (1, Some(block)),
            Emission::Tick { .. } => (2, None),
            Emission::Stopped { .. } => (3, None),
        };
        let (track, id) = block.map_or((0, BlockId(0)), |b| (b.track, b.id));
        (self.at(), rank, track, id)
    }
}

fn sort_batch(batch: &mut [Emission]) {
    batch.sort_by_key(Emission::sort_key);
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("already playing")]
    AlreadyPlaying,
    #[error("not playing")]
    NotPlaying,
    #[error("speed {0} outside [{MIN_SPEED}, {MAX_SPEED}]")]
    SpeedOutOfRange(f64),
    #[error("seek target {to} ms outside [0, {duration}]")]
    SeekOutOfRange { to: Millis, duration: Millis },
}

/// Wire view of the transport.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSnapshot {
    pub playing: bool,
    pub speed: f64,
    /// Playhead in score milliseconds.
    pub position: f64,
    pub score_rev: u64,
}

impl Default for TransportSnapshot {
    fn default() -> Self {
        TransportSnapshot { playing: false, speed: 1.0, position: 0.0, score_rev: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Transport {
    score: Arc<Score>,
    index: TimelineIndex,
    score_rev: u64,
    playing: bool,
    speed: f64,
    anchor_pos: f64,
    elapsed_wall: u64,
    active: BTreeSet<BlockId>,
    /// Whether instruments have been told about `active`. False until the
    /// first play after a new score is loaded.
    announced: bool,
}

impl Transport {
    pub fn new(score: Arc<Score>, score_rev: u64) -> Self {
        let index = TimelineIndex::new(&score);
        let mut tr = Transport {
            score,
            index,
            score_rev,
            playing: false,
            speed: 1.0,
            anchor_pos: 0.0,
            elapsed_wall: 0,
            active: BTreeSet::new(),
            announced: false,
        };
        tr.active = tr.active_at(0);
        tr
    }

    pub fn score(&self) -> &Arc<Score> {
        &self.score
    }

    pub fn score_rev(&self) -> u64 {
        self.score_rev
    }

    pub fn is_playing(&self) -> bool {
        self.playing
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn active(&self) -> &BTreeSet<BlockId> {
        &self.active
    }

    /// Current playhead in score milliseconds.
    pub fn playhead(&self) -> f64 {
        let raw = self.anchor_pos + self.elapsed_wall as f64 * self.speed;
        raw.clamp(0.0, self.score.duration as f64)
    }

    /// Whole-millisecond playhead, the instant the active set refers to.
    pub fn position(&self) -> Millis {
        self.playhead().floor() as Millis
    }

    pub fn snapshot(&self) -> TransportSnapshot {
        TransportSnapshot {
            playing: self.playing,
            speed: self.speed,
            position: self.playhead(),
            score_rev: self.score_rev,
        }
    }

    pub fn play(&mut self) -> Result<Vec<Emission>, TransportError> {
        if self.playing {
            return Err(TransportError::AlreadyPlaying);
        }
        self.reanchor();
        self.playing = true;
        if self.announced {
            return Ok(Vec::new());
        }
        self.announced = true;
        let at = self.position();
        let mut batch: Vec<Emission> =
            self.blocks(&self.active).map(|block| Emission::Begin { at, block }).collect();
        sort_batch(&mut batch);
        Ok(batch)
    }

    /// Freezes the playhead. Sounding blocks get no End.
    pub fn pause(&mut self) -> Result<(), TransportError> {
        if !self.playing {
            return Err(TransportError::NotPlaying);
        }
        self.reanchor();
        self.playing = false;
        Ok(())
    }

    pub fn set_speed(&mut self, speed: f64) -> Result<(), TransportError> {
        if !(MIN_SPEED..=MAX_SPEED).contains(&speed) {
            return Err(TransportError::SpeedOutOfRange(speed));
        }
        self.reanchor();
        self.speed = speed;
        Ok(())
    }

    pub fn seek(&mut self, to: Millis) -> Result<Vec<Emission>, TransportError> {
        if to > self.score.duration {
            return Err(TransportError::SeekOutOfRange { to, duration: self.score.duration });
        }
        self.anchor_pos = to as f64;
        self.elapsed_wall = 0;
        let next = self.active_at(to);
        Ok(self.move_to(next, &self.score.clone()))
    }

    /// Moves wall time forward by `wall_dt` milliseconds.
    pub fn advance(&mut self, wall_dt: u64) -> Vec<Emission> {
        if !self.playing {
            return Vec::new();
        }
        let before = self.position();
        self.elapsed_wall += wall_dt;
        let duration = self.score.duration;
        let raw = self.anchor_pos + self.elapsed_wall as f64 * self.speed;
        let finished = raw >= duration as f64;
        let after = if finished { duration } else { raw.floor() as Millis };

        let mut batch: Vec<Emission> = self
            .index
            .ending_in(before, after)
            .map(|i| Emission::End { at: self.score.events[i].end(), block: self.score.events[i].clone() })
            .chain(self.index.starting_in(before, after).map(|i| Emission::Begin {
                at: self.score.events[i].start,
                block: self.score.events[i].clone(),
            }))
            .collect();
        sort_batch(&mut batch);
        batch.push(Emission::Tick { at: after });
        self.active = self.active_at(after);
        if finished {
            self.anchor_pos = duration as f64;
            self.elapsed_wall = 0;
            self.playing = false;
            batch.push(Emission::Stopped { at: after });
        }
        batch
    }

    /// Swaps in an edited score, keeping the playhead (clamped to the new
    /// duration). Returns the End/Begin diff for sounding blocks.
    pub fn replace_score(&mut self, score: Arc<Score>, score_rev: u64) -> Vec<Emission> {
        let old = std::mem::replace(&mut self.score, score);
        self.index = TimelineIndex::new(&self.score);
        self.score_rev = score_rev;
        let pos = self.playhead();
        self.anchor_pos = pos;
        self.elapsed_wall = 0;
        let next = self.active_at(pos.floor() as Millis);
        self.move_to(next, &old)
    }

    /// Loads a new score from the top: pauses, rewinds to 0 and ends every
    /// sounding block. The next play announces the new score's blocks.
    pub fn load(&mut self, score: Arc<Score>, score_rev: u64) -> Vec<Emission> {
        let ends = if self.announced {
            let mut batch: Vec<Emission> =
                self.blocks(&self.active).map(|block| Emission::End { at: 0, block }).collect();
            sort_batch(&mut batch);
            batch
        } else {
            Vec::new()
        };
        let speed = self.speed;
        *self = Transport::new(score, score_rev);
        self.speed = speed;
        ends
    }

    fn reanchor(&mut self) {
        self.anchor_pos = self.playhead();
        self.elapsed_wall = 0;
    }

    fn active_at(&self, t: Millis) -> BTreeSet<BlockId> {
        self.index.active_at(t).into_iter().map(|i| self.score.events[i].id).collect()
    }

    /// Replaces the active set. `previous` resolves ids that may no longer
    /// be in the current score.
    fn move_to(&mut self, next: BTreeSet<BlockId>, previous: &Score) -> Vec<Emission> {
        let prev = std::mem::replace(&mut self.active, next);
        if !self.announced {
            return Vec::new();
        }
        let at = self.position();
        let ended = prev.difference(&self.active).filter_map(|id| previous.block(*id).cloned());
        let mut batch: Vec<Emission> = ended.map(|block| Emission::End { at, block }).collect();
        batch.extend(
            self.active
                .difference(&prev)
                .filter_map(|id| self.score.block(*id).cloned())
                .map(|block| Emission::Begin { at, block }),
        );
        sort_batch(&mut batch);
        batch
    }

    fn blocks<'a>(&'a self, ids: &'a BTreeSet<BlockId>) -> impl Iterator<Item = ScoreBlock> + 'a {
        ids.iter().filter_map(|id| self.score.block(*id).cloned())
    }
}
