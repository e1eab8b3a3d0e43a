mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::{brute_active, random_feasible_constraints, septet_hour};
use john_core::generator::generate;
use john_core::rng::Rng;
use john_core::score::{BlockId, Millis, Score};
use john_core::transport::{Emission, Transport};
use proptest::prelude::*;

const SPEEDS: [f64; 6] = [0.1, 0.5, 1.0, 1.5, 4.0, 10.0];

fn block_events(batch: &[Emission]) -> Vec<(u8, Millis, BlockId)> {
    batch
        .iter()
        .filter_map(|e| match e {
            Emission::End { at, block } => Some((0, *at, block.id)),
            Emission::Begin { at, block } => Some((1, *at, block.id)),
            _ => None,
        })
        .collect()
}

/// Begins and Ends a run from `from` to `to` must produce, in order.
fn crossing_oracle(score: &Score, from: Millis, to: Millis) -> Vec<(u8, Millis, BlockId)> {
    let mut out: Vec<(Millis, u8, usize, BlockId)> = Vec::new();
    for b in &score.events {
        if b.start <= from && from < b.end() {
            out.push((from, 1, b.track, b.id));
        }
        if from < b.start && b.start <= to {
            out.push((b.start, 1, b.track, b.id));
        }
        if from < b.end() && b.end() <= to {
            out.push((b.end(), 0, b.track, b.id));
        }
    }
    out.sort();
    out.into_iter().map(|(at, kind, _, id)| (kind, at, id)).collect()
}

fn started(score: &Score, speed: f64, from: Millis) -> (Transport, Vec<Emission>) {
    let mut t = Transport::new(Arc::new(score.clone()), 0);
    t.set_speed(speed).unwrap();
    t.seek(from).unwrap();
    let first = t.play().unwrap();
    (t, first)
}

#[test]
fn chunked_advance_equals_single_advance() {
    let mut rng = Rng::new(31);
    for trial in 0..150 {
        let c = random_feasible_constraints(&mut rng, 6, 600_000);
        let score = generate(&c).unwrap();
        let speed = SPEEDS[rng.uniform_index(SPEEDS.len())];
        let from = rng.uniform_int(0, score.duration);
        let wall = rng.uniform_int(0, ((score.duration - from) as f64 / speed) as u64 + 2_000);

        let (mut single, first) = started(&score, speed, from);
        let mut single_log = block_events(&first);
        single_log.extend(block_events(&single.advance(wall)));

        let (mut chunked, first) = started(&score, speed, from);
        let mut chunked_log = block_events(&first);
        let mut left = wall;
        while left > 0 {
            let dt = rng.uniform_int(1, 500).min(left);
            left -= dt;
            chunked_log.extend(block_events(&chunked.advance(dt)));
            assert_eq!(*chunked.active(), brute_active(&score, chunked.position()), "trial {trial}");
        }
        assert_eq!(single_log, chunked_log, "trial {trial}");
        assert_eq!(single.playhead(), chunked.playhead(), "trial {trial}");
        assert_eq!(*single.active(), brute_active(&score, single.position()));

        let to = single.position();
        assert_eq!(single_log, crossing_oracle(&score, from, to), "trial {trial}");
    }
}

#[test]
fn full_playthrough_pairs_every_block() {
    for seed in 0..5 {
        let score = generate(&septet_hour(seed)).unwrap();
        let (mut t, first) = started(&score, 10.0, 0);
        let mut log = block_events(&first);
        let mut stopped = 0;
        while t.is_playing() {
            let batch = t.advance(50);
            stopped += batch.iter().filter(|e| matches!(e, Emission::Stopped { .. })).count();
            log.extend(block_events(&batch));
        }
        assert_eq!(stopped, 1);
        let begins: BTreeSet<_> = log.iter().filter(|e| e.0 == 1).map(|e| e.2).collect();
        let ends: BTreeSet<_> = log.iter().filter(|e| e.0 == 0).map(|e| e.2).collect();
        let all: BTreeSet<_> = score.events.iter().map(|b| b.id).collect();
        assert_eq!(begins, all);
        assert_eq!(ends, all);
        for b in &score.events {
            let begin = log.iter().position(|e| e == &(1, b.start, b.id)).unwrap();
            let end = log.iter().position(|e| e == &(0, b.end(), b.id)).unwrap();
            assert!(begin < end);
        }
    }
}

#[test]
fn seek_emits_the_active_set_difference() {
    let mut rng = Rng::new(12);
    let score = generate(&septet_hour(8)).unwrap();
    let (mut t, _) = started(&score, 1.0, 0);
    t.pause().unwrap();
    for _ in 0..300 {
        let before = t.active().clone();
        let to = rng.uniform_int(0, score.duration);
        let batch = t.seek(to).unwrap();
        let after = brute_active(&score, to);
        let ends: BTreeSet<_> = batch.iter().filter(|e| matches!(e, Emission::End { .. })).map(|e| e.block().unwrap().id).collect();
        let begins: BTreeSet<_> =
            batch.iter().filter(|e| matches!(e, Emission::Begin { .. })).map(|e| e.block().unwrap().id).collect();
        assert_eq!(ends, before.difference(&after).copied().collect());
        assert_eq!(begins, after.difference(&before).copied().collect());
        assert!(batch.iter().all(|e| e.at() == to));
        // Ends come before Begins.
        let first_begin = batch.iter().position(|e| matches!(e, Emission::Begin { .. })).unwrap_or(batch.len());
        assert!(batch[first_begin..].iter().all(|e| !matches!(e, Emission::End { .. })));
        assert_eq!(*t.active(), after);
    }
}

#[test]
fn pause_freezes_and_resume_continues() {
    let score = generate(&septet_hour(4)).unwrap();
    let (mut t, _) = started(&score, 2.0, 1_000);
    t.advance(1_000);
    assert_eq!(t.position(), 3_000);
    t.pause().unwrap();
    assert!(t.advance(10_000).is_empty());
    assert_eq!(t.position(), 3_000);
    assert!(t.play().unwrap().is_empty(), "resume re-announces nothing");
    t.set_speed(0.5).unwrap();
    t.advance(1_000);
    assert_eq!(t.position(), 3_500);
}

proptest! {
    #[test]
    fn chunk_splits_compose(seed in 0u64..50, chunks in proptest::collection::vec(1u64..500, 1..60), speed_i in 0usize..6) {
        let score = generate(&random_feasible_constraints(&mut Rng::new(seed), 5, 300_000)).unwrap();
        let speed = SPEEDS[speed_i];
        let total: u64 = chunks.iter().sum();
        let (mut a, _) = started(&score, speed, 0);
        let (mut b, _) = started(&score, speed, 0);
        let one = block_events(&a.advance(total));
        let many: Vec<_> = chunks.iter().flat_map(|dt| block_events(&b.advance(*dt))).collect();
        prop_assert_eq!(one, many);
        prop_assert_eq!(a.playhead(), b.playhead());
        prop_assert_eq!(a.active(), b.active());
    }
}
