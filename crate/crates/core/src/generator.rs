//! Random score propositions under global constraints, and the matching
//! checker.
//!
//! Generation splits the timeline into consecutive segments; in each segment
//! a random ensemble (between `min_players` and `max_players` tracks) plays
//! one block spanning the whole segment. Every random choice is drawn from a
//! single [`Rng`] stream seeded by the constraints, in a fixed order, so a
//! seed reproduces the score exactly.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Map;
use thiserror::Error;

use crate::rng::Rng;
use crate::score::{BlockId, Karma, Millis, Nuance, Score, ScoreBlock, FORMAT_VERSION};

/// Restarts allowed before [`partition_timeline`] gives up.
pub const PARTITION_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConstraints {
    pub total_duration: Millis,
    pub min_players: usize,
    pub max_players: usize,
    pub min_block: Millis,
    pub max_block: Millis,
    pub karmas: Vec<Karma>,
    pub nuance_lo: Nuance,
    pub nuance_hi: Nuance,
    pub track_names: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("invalid constraints: {0}")]
    Constraints(String),
    #[error("infeasible: {0}")]
    Infeasible(Infeasible),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infeasible {
    /// No segment count N satisfies `N * min_block <= total <= N * max_block`.
    NoSegmentCount { total: Millis, min_block: Millis, max_block: Millis },
    /// `min_block` is zero or exceeds `max_block`.
    BadBounds { min_block: Millis, max_block: Millis },
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Infeasible::NoSegmentCount { total, min_block, max_block } => write!(
                f,
                "no integer N with N*min_block <= total_duration <= N*max_block \
                 (total_duration={total}, min_block={min_block}, max_block={max_block})"
            ),
            Infeasible::BadBounds { min_block, max_block } => write!(
                f,
                "block bounds must satisfy 1 <= min_block <= max_block \
                 (min_block={min_block}, max_block={max_block})"
            ),
        }
    }
}

impl GeneratorConstraints {
    /// Checks the structural invariants (not feasibility).
    pub fn check(&self) -> Result<(), GenerateError> {
        let fail = |msg: String| Err(GenerateError::Constraints(msg));
        if self.min_block == 0 {
            return fail("min_block must be at least 1 ms".into());
        }
        if self.min_block > self.max_block {
            return fail(format!("min_block {} exceeds max_block {}", self.min_block, self.max_block));
        }
        if self.max_players == 0 {
            return fail("max_players must be at least 1".into());
        }
        if self.min_players > self.max_players {
            return fail(format!(
                "min_players {} exceeds max_players {}",
                self.min_players, self.max_players
            ));
        }
        if self.max_players > self.track_names.len() {
            return fail(format!(
                "max_players {} exceeds the number of tracks {}",
                self.max_players,
                self.track_names.len()
            ));
        }
        if self.track_names.iter().any(String::is_empty) {
            return fail("track names must be non-empty".into());
        }
        if self.karmas.is_empty() {
            return fail("the karma vocabulary is empty".into());
        }
        if self.nuance_lo > self.nuance_hi {
            return fail(format!("nuance_lo {} is louder than nuance_hi {}", self.nuance_lo, self.nuance_hi));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorConstraints { seed, ..self.clone() }
    }
}

/// Whether some segment count `N >= 1` has `N * min_block <= total <= N * max_block`
/// (trivially true for an empty timeline).
pub fn is_feasible(total: Millis, min_block: Millis, max_block: Millis) -> bool {
    if total == 0 {
        return true;
    }
    if min_block == 0 || min_block > max_block {
        return false;
    }
    let fewest = total.div_ceil(max_block);
    let most = total / min_block;
    fewest <= most
}

/// Splits `total` into consecutive durations, each in `[min_block, max_block]`.
///
/// Draws each duration uniformly from the values that leave at least
/// `min_block` behind, restarting when the remainder cannot be split, up to
/// [`PARTITION_ATTEMPTS`] times. Returns an error only when no segment count
/// fits the bounds.
pub fn partition_timeline(
    total: Millis,
    min_block: Millis,
    max_block: Millis,
    rng: &mut Rng,
) -> Result<Vec<Millis>, Infeasible> {
    if min_block == 0 || min_block > max_block {
        return Err(Infeasible::BadBounds { min_block, max_block });
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    if !is_feasible(total, min_block, max_block) {
        return Err(Infeasible::NoSegmentCount { total, min_block, max_block });
    }
    'attempt: for _ in 0..PARTITION_ATTEMPTS {
        let mut segments = Vec::new();
        let mut remaining = total;
        loop {
            if (min_block..=max_block).contains(&remaining) {
                segments.push(remaining);
                return Ok(segments);
            }
            // remaining > max_block here; leave at least min_block behind.
            let Some(upper) = remaining.checked_sub(min_block).map(|r| r.min(max_block)) else {
                continue 'attempt;
            };
            if upper < min_block {
                continue 'attempt;
            }
            let d = rng.uniform_int(min_block, upper);
            segments.push(d);
            remaining -= d;
        }
    }
    Ok(constructive_partition(total, min_block, max_block, rng))
}

/// Fallback once the restart budget is spent on a feasible timeline: choose a
/// segment count, start every segment at `min_block` and hand out the rest so
/// that no segment exceeds `max_block`. Always succeeds when feasible.
fn constructive_partition(total: Millis, min_block: Millis, max_block: Millis, rng: &mut Rng) -> Vec<Millis> {
    let fewest = total.div_ceil(max_block);
    let most = total / min_block;
    let count = rng.uniform_int(fewest, most);
    let slack = max_block - min_block;
    let mut extra = total - count * min_block;
    (0..count)
        .map(|i| {
            let room_after = (count - i - 1).saturating_mul(slack);
            let take = rng.uniform_int(extra.saturating_sub(room_after), slack.min(extra));
            extra -= take;
            min_block + take
        })
        .collect()
}

/// Produces a score satisfying `c`, reproducibly from `c.seed`.
pub fn generate(c: &GeneratorConstraints) -> Result<Score, GenerateError> {
    c.check()?;
    let mut rng = Rng::new(c.seed);
    let segments = partition_timeline(c.total_duration, c.min_block, c.max_block, &mut rng)
        .map_err(GenerateError::Infeasible)?;

    let track_count = c.track_names.len();
    let (lo, hi) = (c.nuance_lo.ordinal() as u64, c.nuance_hi.ordinal() as u64);
    let mut events = Vec::new();
    let mut start = 0;
    for duration in segments {
        let players = rng.uniform_int(c.min_players as u64, c.max_players as u64) as usize;
        let mut order: Vec<usize> = (0..track_count).collect();
        for i in 0..players {
            let j = rng.uniform_int(i as u64, track_count as u64 - 1) as usize;
            order.swap(i, j);
        }
        let mut chosen = order[..players].to_vec();
        chosen.sort_unstable();
        for track in chosen {
            let karma = c.karmas[rng.uniform_index(c.karmas.len())].clone();
            let nuance = Nuance::from_ordinal(rng.uniform_int(lo, hi) as u8).expect("ordinal within ppp..fff");
            let high = rng.next_u64();
            let low = rng.next_u64();
            events.push(ScoreBlock {
                id: BlockId::from_halves(high, low),
                track,
                start,
                duration,
                karma,
                nuance,
                extras: Map::new(),
            });
        }
        start += duration;
    }

    Ok(Score {
        version: FORMAT_VERSION,
        tracks: c.track_names.clone(),
        duration: c.total_duration,
        events,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    TrackOverlap,
    OutOfBounds,
    BlockTooShort,
    BlockTooLong,
    TooFewPlayers,
    TooManyPlayers,
    UnknownKarma,
    NuanceOutOfRange,
    DuplicateId,
}

/// Where a violation happens: an instant or a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Time(Millis),
    Block(BlockId),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Time(t) => write!(f, "{t} ms"),
            Location::Block(id) => write!(f, "block {id}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub at: Location,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.at, self.detail)
    }
}

/// Lists every way `score` departs from `c`. An empty list means it conforms.
///
/// Accepts scores that break the document invariants (overlaps, duplicate
/// ids, blocks past the end) and reports those too.
pub fn validate(score: &Score, c: &GeneratorConstraints) -> Vec<Violation> {
    let mut out = Vec::new();
    let total = c.total_duration;
    if score.duration != total {
        out.push(Violation {
            kind: ViolationKind::OutOfBounds,
            at: Location::Time(score.duration),
            detail: format!("score duration {} differs from total_duration {total}", score.duration),
        });
    }
    check_blocks(score, c, &mut out);
    check_overlaps(score, &mut out);
    check_players(score, c, &mut out);
    out
}

fn check_blocks(score: &Score, c: &GeneratorConstraints, out: &mut Vec<Violation>) {
    let total = c.total_duration;
    let karmas: HashSet<&Karma> = c.karmas.iter().collect();
    let mut seen = HashSet::new();
    for b in &score.events {
        let at = Location::Block(b.id);
        let mut push = |kind, detail: String| out.push(Violation { kind, at, detail });
        if !seen.insert(b.id) {
            push(ViolationKind::DuplicateId, format!("id {} is used more than once", b.id));
        }
        if b.track >= score.tracks.len() {
            push(
                ViolationKind::OutOfBounds,
                format!("track {} does not exist ({} tracks)", b.track, score.tracks.len()),
            );
        }
        let end = b.start as u128 + b.duration as u128;
        if end > total as u128 {
            push(ViolationKind::OutOfBounds, format!("[{}, {end}) extends past {total}", b.start));
        }
        if b.duration < c.min_block {
            push(ViolationKind::BlockTooShort, format!("duration {} < min_block {}", b.duration, c.min_block));
        }
        if b.duration > c.max_block {
            push(ViolationKind::BlockTooLong, format!("duration {} > max_block {}", b.duration, c.max_block));
        }
        if !karmas.contains(&b.karma) {
            push(ViolationKind::UnknownKarma, format!("karma {:?} is not in the vocabulary", b.karma.as_str()));
        }
        if b.nuance < c.nuance_lo || b.nuance > c.nuance_hi {
            push(
                ViolationKind::NuanceOutOfRange,
                format!("nuance {} outside {}..{}", b.nuance, c.nuance_lo, c.nuance_hi),
            );
        }
    }
}

fn check_overlaps(score: &Score, out: &mut Vec<Violation>) {
    let mut lanes: HashMap<usize, Vec<&ScoreBlock>> = HashMap::new();
    for b in &score.events {
        lanes.entry(b.track).or_default().push(b);
    }
    let mut found = Vec::new();
    for (track, mut lane) in lanes {
        lane.sort_by_key(|b| (b.start, b.id));
        // The block reaching furthest so far.
        let mut reach: Option<&ScoreBlock> = None;
        for b in lane {
            match reach {
                Some(r) if b.start < r.end() => {
                    found.push((b.start, b.id, r.id, track));
                    if b.end() > r.end() {
                        reach = Some(b);
                    }
                }
                _ => reach = Some(b),
            }
        }
    }
    found.sort();
    out.extend(found.into_iter().map(|(_, id, other, track)| Violation {
        kind: ViolationKind::TrackOverlap,
        at: Location::Block(id),
        detail: format!("overlaps block {other} on track {track}"),
    }));
}

/// Sweep over block boundaries, counting distinct sounding tracks in each
/// elementary interval of `[0, total)`.
fn check_players(score: &Score, c: &GeneratorConstraints, out: &mut Vec<Violation>) {
    let total = c.total_duration;
    if total == 0 {
        return;
    }
    // (time, 0 = end | 1 = begin, track); ends sort before begins.
    let mut points: Vec<(Millis, u8, usize)> = Vec::with_capacity(score.events.len() * 2);
    for b in &score.events {
        let start = b.start.min(total);
        let end = b.end().min(total);
        if start < end {
            points.push((start, 1, b.track));
            points.push((end, 0, b.track));
        }
    }
    points.sort_unstable();

    let mut per_track: HashMap<usize, usize> = HashMap::new();
    let mut playing = 0usize;
    let mut cursor = 0;
    let mut i = 0;
    while cursor < total {
        while i < points.len() && points[i].0 == cursor {
            let (_, kind, track) = points[i];
            let n = per_track.entry(track).or_insert(0);
            if kind == 1 {
                if *n == 0 {
                    playing += 1;
                }
                *n += 1;
            } else {
                *n -= 1;
                if *n == 0 {
                    playing -= 1;
                }
            }
            i += 1;
        }
        let next = points.get(i).map_or(total, |p| p.0.min(total));
        if next > cursor {
            if playing < c.min_players {
                out.push(Violation {
                    kind: ViolationKind::TooFewPlayers,
                    at: Location::Time(cursor),
                    detail: format!("{playing} playing in [{cursor}, {next}), min_players {}", c.min_players),
                });
            } else if playing > c.max_players {
                out.push(Violation {
                    kind: ViolationKind::TooManyPlayers,
                    at: Location::Time(cursor),
                    detail: format!("{playing} playing in [{cursor}, {next}), max_players {}", c.max_players),
                });
            }
        }
        cursor = next;
    }
}
