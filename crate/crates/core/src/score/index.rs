use std::collections::BTreeSet;

use super::{BlockId, Millis, Score};

/// Sorted views over a valid score for point and range queries.
#[derive(Clone, Debug, Default)]
pub struct TimelineIndex {
    /// Per track: `(start, end, event index)` sorted by start.
    lanes: Vec<Vec<(Millis, Millis, usize)>>,
    /// `(start, event index)` sorted.
    starts: Vec<(Millis, usize)>,
    /// `(end, event index)` sorted.
    ends: Vec<(Millis, usize)>,
}

impl TimelineIndex {
    pub fn new(score: &Score) -> Self {
        let lane_count = score.events.iter().map(|b| b.track + 1).max().unwrap_or(0);
        let mut lanes = vec![Vec::new(); lane_count];
        let mut starts = Vec::with_capacity(score.events.len());
        let mut ends = Vec::with_capacity(score.events.len());
        for (i, b) in score.events.iter().enumerate() {
            lanes[b.track].push((b.start, b.end(), i));
            starts.push((b.start, i));
            ends.push((b.end(), i));
        }
        for lane in &mut lanes {
            lane.sort_unstable();
        }
        starts.sort_unstable();
        ends.sort_unstable();
        TimelineIndex { lanes, starts, ends }
    }

    /// Indices of events active at `t`, in track order.
    ///
    /// Relies on the per-track non-overlap invariant: at most one block per
    /// lane can contain `t`.
    pub fn active_at(&self, t: Millis) -> Vec<usize> {
        self.lanes
            .iter()
            .filter_map(|lane| {
                let n = lane.partition_point(|&(start, _, _)| start <= t);
                let &(_, end, i) = lane.get(n.checked_sub(1)?)?;
                (t < end).then_some(i)
            })
            .collect()
    }

    /// Events with `after < start <= upto`.
    pub fn starting_in(&self, after: Millis, upto: Millis) -> impl Iterator<Item = usize> + '_ {
        range(&self.starts, after, upto)
    }

    /// Events with `after < end <= upto`.
    pub fn ending_in(&self, after: Millis, upto: Millis) -> impl Iterator<Item = usize> + '_ {
        range(&self.ends, after, upto)
    }
}

fn range(sorted: &[(Millis, usize)], after: Millis, upto: Millis) -> impl Iterator<Item = usize> + '_ {
    let lo = sorted.partition_point(|&(t, _)| t <= after);
    let hi = sorted.partition_point(|&(t, _)| t <= upto).max(lo);
    sorted[lo..hi].iter().map(|&(_, i)| i)
}

/// Ids of the blocks sounding at `t`: `start <= t < start + duration`.
pub fn active_events(score: &Score, t: Millis) -> BTreeSet<BlockId> {
    TimelineIndex::new(score)
        .active_at(t)
        .into_iter()
        .map(|i| score.events[i].id)
        .collect()
}
