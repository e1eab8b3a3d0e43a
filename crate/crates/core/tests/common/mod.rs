//! Brute-force oracles and random fixtures shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use john_core::generator::{GeneratorConstraints, Location, ViolationKind};
use john_core::rng::Rng;
use john_core::score::{BlockId, Karma, Millis, Nuance, Score, ScoreBlock};

pub const VOCABULARY: [&str; 8] = ["calm", "storm", "drift", "pulse", "grain", "void", "swarm", "glass"];

pub fn karmas(n: usize) -> Vec<Karma> {
    VOCABULARY[..n].iter().map(|k| Karma::new(*k).unwrap()).collect()
}

/// Exhaustive search for a segment count `n` with `n*lo <= total <= n*hi`.
pub fn exists_segment_count(total: Millis, lo: Millis, hi: Millis) -> bool {
    if total == 0 {
        return true;
    }
    let mut n = 1;
    while n * lo <= total {
        if total <= n * hi {
            return true;
        }
        n += 1;
    }
    false
}

/// Random constraint set with up to `max_tracks` tracks and a timeline of up
/// to `max_total` ms; feasible per the exhaustive search.
pub fn random_feasible_constraints(rng: &mut Rng, max_tracks: usize, max_total: Millis) -> GeneratorConstraints {
    loop {
        let tracks = rng.uniform_int(1, max_tracks as u64) as usize;
        let total = if rng.uniform_int(0, 49) == 0 { 0 } else { rng.uniform_int(1, max_total) };
        let min_block = rng.uniform_int(1_000, 600_000);
        let max_block = min_block + rng.uniform_int(0, 600_000);
        if !exists_segment_count(total, min_block, max_block) {
            continue;
        }
        let max_players = rng.uniform_int(1, tracks as u64) as usize;
        let min_players = rng.uniform_int(0, max_players as u64) as usize;
        let lo = rng.uniform_int(0, 7);
        let hi = rng.uniform_int(lo, 7);
        return GeneratorConstraints {
            total_duration: total,
            min_players,
            max_players,
            min_block,
            max_block,
            karmas: karmas(rng.uniform_int(1, VOCABULARY.len() as u64) as usize),
            nuance_lo: Nuance::from_ordinal(lo as u8).unwrap(),
            nuance_hi: Nuance::from_ordinal(hi as u8).unwrap(),
            track_names: (0..tracks).map(|i| format!("player{i}")).collect(),
            seed: rng.next_u64(),
        };
    }
}

/// Seven players, one hour, blocks of 30 s to 5 min.
pub fn septet_hour(seed: u64) -> GeneratorConstraints {
    GeneratorConstraints {
        total_duration: 3_600_000,
        min_players: 1,
        max_players: 7,
        min_block: 30_000,
        max_block: 300_000,
        karmas: karmas(6),
        nuance_lo: Nuance::Ppp,
        nuance_hi: Nuance::Fff,
        track_names: (1..=7).map(|i| format!("musician{i}")).collect(),
        seed,
    }
}

/// Linear scan for blocks sounding at `t`.
pub fn brute_active(score: &Score, t: Millis) -> BTreeSet<BlockId> {
    score
        .events
        .iter()
        .filter(|b| b.start <= t && t < b.start + b.duration)
        .map(|b| b.id)
        .collect()
}

fn distinct_tracks_at(events: &[ScoreBlock], t: Millis) -> usize {
    events
        .iter()
        .filter(|b| b.start <= t && (t as u128) < b.start as u128 + b.duration as u128)
        .map(|b| b.track)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Every violation `validate` should report, as `(kind, location)` pairs.
///
/// Ensemble size is sampled at every block boundary and one millisecond
/// after it; a bad sample is attributed to the boundary it follows.
pub fn violation_oracle(score: &Score, c: &GeneratorConstraints) -> BTreeSet<(ViolationKind, Location)> {
    let mut out = BTreeSet::new();
    let total = c.total_duration;
    if score.duration != total {
        out.insert((ViolationKind::OutOfBounds, Location::Time(score.duration)));
    }

    let ev = &score.events;
    for (i, b) in ev.iter().enumerate() {
        let at = Location::Block(b.id);
        if ev[..i].iter().any(|a| a.id == b.id) {
            out.insert((ViolationKind::DuplicateId, at));
        }
        if b.track >= score.tracks.len() || b.start as u128 + b.duration as u128 > total as u128 {
            out.insert((ViolationKind::OutOfBounds, at));
        }
        if b.duration < c.min_block {
            out.insert((ViolationKind::BlockTooShort, at));
        }
        if b.duration > c.max_block {
            out.insert((ViolationKind::BlockTooLong, at));
        }
        if !c.karmas.contains(&b.karma) {
            out.insert((ViolationKind::UnknownKarma, at));
        }
        if b.nuance.ordinal() < c.nuance_lo.ordinal() || b.nuance.ordinal() > c.nuance_hi.ordinal() {
            out.insert((ViolationKind::NuanceOutOfRange, at));
        }
        // Overlap with any block on the same lane that sorts before it;
        // exact duplicates fall back to document order.
        let overlapped = ev.iter().enumerate().any(|(j, a)| {
            a.track == b.track
                && (a.start, a.id, j) < (b.start, b.id, i)
                && (b.start as u128) < a.start as u128 + a.duration as u128
        });
        if overlapped {
            out.insert((ViolationKind::TrackOverlap, at));
        }
    }

    if total > 0 {
        let mut bounds: BTreeSet<Millis> = BTreeSet::from([0]);
        for b in ev {
            let start = b.start.min(total);
            let end = b.start.saturating_add(b.duration).min(total);
            if start < end {
                bounds.insert(start);
                bounds.insert(end);
            }
        }
        let bounds: Vec<Millis> = bounds.into_iter().filter(|&b| b < total).collect();
        for &b in &bounds {
            for sample in [b, b + 1] {
                if sample >= total {
                    continue;
                }
                let owner = *bounds.iter().rev().find(|&&x| x <= sample).unwrap();
                let n = distinct_tracks_at(ev, sample);
                if n < c.min_players {
                    out.insert((ViolationKind::TooFewPlayers, Location::Time(owner)));
                } else if n > c.max_players {
                    out.insert((ViolationKind::TooManyPlayers, Location::Time(owner)));
                }
            }
        }
    }
    out
}

/// Applies 1 to 4 random corruptions to a score's events.
pub fn corrupt(score: &mut Score, c: &GeneratorConstraints, rng: &mut Rng) {
    let rounds = rng.uniform_int(1, 4);
    for _ in 0..rounds {
        if score.events.is_empty() {
            let b = ScoreBlock {
                id: BlockId(rng.next_u64() as u128),
                track: 0,
                start: rng.uniform_int(0, c.total_duration + 1_000),
                duration: rng.uniform_int(1, 100_000),
                karma: Karma::new("stray").unwrap(),
                nuance: Nuance::Mf,
                extras: Default::default(),
            };
            score.events.push(b);
            continue;
        }
        let i = rng.uniform_index(score.events.len());
        match rng.uniform_int(0, 7) {
            0 => {
                let b = &mut score.events[i];
                let shift = rng.uniform_int(1, 120_000);
                b.start = if rng.uniform_int(0, 1) == 0 { b.start.saturating_sub(shift) } else { b.start + shift };
            }
            1 => {
                let b = &mut score.events[i];
                b.duration = rng.uniform_int(1, c.max_block * 2 + 1);
            }
            2 => {
                score.events.remove(i);
            }
            3 => {
                let mut copy = score.events[i].clone();
                copy.track = rng.uniform_index(score.tracks.len().max(1));
                if rng.uniform_int(0, 1) == 0 {
                    copy.id = BlockId(((rng.next_u64() as u128) << 64) | rng.next_u64() as u128);
                }
                score.events.push(copy);
            }
            4 => score.events[i].karma = Karma::new("unlisted").unwrap(),
            5 => {
                let n = Nuance::from_ordinal(rng.uniform_int(0, 7) as u8).unwrap();
                score.events[i].nuance = n;
            }
            6 => score.events[i].track = score.tracks.len() + rng.uniform_index(3),
            _ => {
                // Same lane, overlapping start.
                let b = score.events[i].clone();
                let mut copy = b.clone();
                copy.id = BlockId(((rng.next_u64() as u128) << 64) | 1);
                copy.start = b.start + b.duration / 2;
                score.events.push(copy);
            }
        }
    }
    score.events.sort_by_key(|b| (b.start, b.track, b.id));
}

/// Rebuilds block intervals from a decoded OSC begin/end log.
/// Returns `(id, track, start_ms, duration_ms)` per matched pair.
pub fn reconstruct_from_osc(messages: &[rosc::OscMessage]) -> Result<Vec<(String, i32, Millis, Millis)>, String> {
    let mut open: HashMap<String, (i32, Millis, Millis)> = HashMap::new();
    let mut closed = Vec::new();
    for m in messages {
        match m.addr.as_str() {
            "/john/event/begin" => {
                let [rosc::OscType::String(id), rosc::OscType::Int(track), rosc::OscType::String(_), rosc::OscType::String(_), rosc::OscType::Float(start), rosc::OscType::Float(dur)] =
                    m.args.as_slice()
                else {
                    return Err(format!("bad begin args {:?}", m.args));
                };
                let ms = |s: f32| (s as f64 * 1000.0).round() as Millis;
                if open.insert(id.clone(), (*track, ms(*start), ms(*dur))).is_some() {
                    return Err(format!("block {id} began twice"));
                }
            }
            "/john/event/end" => {
                let [rosc::OscType::String(id), rosc::OscType::Int(track)] = m.args.as_slice() else {
                    return Err(format!("bad end args {:?}", m.args));
                };
                let (t, start, dur) = open.remove(id).ok_or_else(|| format!("end without begin for {id}"))?;
                if t != *track {
                    return Err(format!("track mismatch for {id}"));
                }
                closed.push((id.clone(), t, start, dur));
            }
            _ => {}
        }
    }
    if !open.is_empty() {
        return Err(format!("{} blocks never ended", open.len()));
    }
    closed.sort();
    Ok(closed)
}

pub fn to_rosc(msg: &john_core::osc::OscMessage) -> rosc::OscMessage {
    use john_core::osc::OscArg;
    rosc::OscMessage {
        addr: msg.address.clone(),
        args: msg
            .args
            .iter()
            .map(|a| match a {
                OscArg::Int(i) => rosc::OscType::Int(*i),
                OscArg::Float(f) => rosc::OscType::Float(*f),
                OscArg::Str(s) => rosc::OscType::String(s.clone()),
            })
            .collect(),
    }
}

pub fn rosc_encode(msg: &john_core::osc::OscMessage) -> Vec<u8> {
    rosc::encoder::encode(&rosc::OscPacket::Message(to_rosc(msg))).unwrap()
}

pub fn rosc_decode(packet: &[u8]) -> rosc::OscMessage {
    match rosc::decoder::decode_udp(packet).unwrap().1 {
        rosc::OscPacket::Message(m) => m,
        other => panic!("expected a message, got {other:?}"),
    }
}

/// Twenty messages covering every address, arity and padding remainder.
pub fn osc_corpus() -> Vec<john_core::osc::OscMessage> {
    use john_core::osc::{OscArg, OscMessage, ADDR_BEGIN, ADDR_END, ADDR_STOP, ADDR_TIME};
    let id = |n: u128| BlockId(n).to_string();
    let mut out = vec![
        OscMessage::new(ADDR_TIME, vec![OscArg::Float(0.0)]),
        OscMessage::new(ADDR_TIME, vec![OscArg::Float(1.5)]),
        OscMessage::new(ADDR_TIME, vec![OscArg::Float(3599.999)]),
        OscMessage::new(ADDR_TIME, vec![OscArg::Float(-0.25)]),
        OscMessage::new(ADDR_STOP, vec![]),
        OscMessage::new("/john/pause", vec![]),
        OscMessage::new("/a", vec![]),
        OscMessage::new("/ab", vec![OscArg::Int(-1)]),
        OscMessage::new("/abc", vec![OscArg::Str(String::new())]),
        OscMessage::new("/abcd", vec![OscArg::Str("x".into()), OscArg::Str("xyz".into()), OscArg::Str("wxyz".into())]),
        OscMessage::new(ADDR_END, vec![OscArg::Str(id(1)), OscArg::Int(0)]),
        OscMessage::new(ADDR_END, vec![OscArg::Str(id(u128::MAX)), OscArg::Int(i32::MAX)]),
        OscMessage::new("/mixed", vec![OscArg::Int(i32::MIN), OscArg::Float(f32::MAX), OscArg::Str("ü".into())]),
    ];
    for (n, (karma, nuance)) in [("calm", "ppp"), ("storm", "fff"), ("drift", "mf"), ("pulse", "p"), ("glass", "f"), ("void", "mp"), ("swarm", "pp")]
        .into_iter()
        .enumerate()
    {
        out.push(OscMessage::new(
            ADDR_BEGIN,
            vec![
                OscArg::Str(id(0xdead_beef << n)),
                OscArg::Int(n as i32),
                OscArg::Str(karma.into()),
                OscArg::Str(nuance.into()),
                OscArg::Float(n as f32 * 123.456),
                OscArg::Float(30.0 + n as f32),
            ],
        ));
    }
    assert_eq!(out.len(), 20);
    out
}

/// Drives `sim` with `ops` random client messages from random clients, with
/// timer advances mixed in. Clients act on a view of the score that is
/// sometimes stale, so edits race and conflict. Returns the script.
pub fn drive_session(sim: &mut john_core::sync::Simulation, clients: usize, ops: usize, rng: &mut Rng) -> Vec<john_core::sync::Step> {
    use john_core::score::{Edit, NewBlock};
    use john_core::sync::{ClientMessage, Step, TransportCommand};

    let mut script = Vec::new();
    let run = |sim: &mut john_core::sync::Simulation, step: Step, script: &mut Vec<Step>| {
        script.push(step.clone());
        sim.step(step);
    };
    for client in 0..clients {
        run(sim, Step::Hello { client }, &mut script);
    }
    let mut views: Vec<Score> = (0..clients).map(|i| sim.replicas[i].as_ref().unwrap().score.clone()).collect();

    let mut sent = 0;
    while sent < ops {
        if rng.uniform_int(0, 7) == 0 {
            run(sim, Step::Advance { wall_ms: rng.uniform_int(1, 2_000) }, &mut script);
            continue;
        }
        let client = rng.uniform_index(clients);
        if rng.uniform_int(0, 1) == 0 {
            views[client] = sim.replicas[client].as_ref().unwrap().score.clone();
        }
        let view = &views[client];
        let pick = |rng: &mut Rng| view.events[rng.uniform_index(view.events.len())].id;
        let roll = rng.uniform_int(0, 99);
        let message = if roll < 6 {
            let mut c = random_feasible_constraints(rng, 7, 600_000);
            if rng.uniform_int(0, 9) == 0 {
                c.min_block = c.total_duration + 1;
                c.max_block = c.total_duration + 1;
            }
            ClientMessage::GenerateScore { constraints: c }
        } else if roll < 35 {
            let command = match rng.uniform_int(0, 4) {
                0 => TransportCommand::Play,
                1 => TransportCommand::Pause,
                2 => TransportCommand::Seek { to: rng.uniform_int(0, view.duration + 1_000) },
                3 => TransportCommand::Speed { value: [0.05, 0.5, 1.0, 2.0, 10.0, 20.0][rng.uniform_index(6)] },
                _ => TransportCommand::Play,
            };
            ClientMessage::Transport { command }
        } else {
            let karma = Karma::new(VOCABULARY[rng.uniform_index(4)]).unwrap();
            let edit = if view.events.is_empty() || roll < 45 {
                Edit::AddBlock {
                    block: NewBlock {
                        id: None,
                        track: rng.uniform_index(view.tracks.len() + 1),
                        start: rng.uniform_int(0, view.duration),
                        duration: rng.uniform_int(1_000, 200_000),
                        karma,
                        nuance: Nuance::from_ordinal(rng.uniform_int(0, 7) as u8).unwrap(),
                    },
                }
            } else {
                match rng.uniform_int(0, 5) {
                    0 => Edit::MoveBlock {
                        target: pick(rng),
                        start: rng.uniform_int(0, view.duration),
                        track: (rng.uniform_int(0, 2) == 0).then(|| rng.uniform_index(view.tracks.len())),
                    },
                    1 => Edit::ResizeBlock { target: pick(rng), duration: rng.uniform_int(0, 300_000) },
                    2 => Edit::SetKarma { target: pick(rng), karma },
                    3 => Edit::SetNuance {
                        target: pick(rng),
                        nuance: Nuance::from_ordinal(rng.uniform_int(0, 7) as u8).unwrap(),
                    },
                    4 => Edit::DeleteBlock { target: pick(rng) },
                    _ => {
                        let mut next = view.clone();
                        next.events.retain(|_| rng.uniform_int(0, 3) != 0);
                        Edit::ReplaceScore { score: next }
                    }
                }
            };
            ClientMessage::EditScore { edit }
        };
        run(sim, Step::Send { client, message }, &mut script);
        sent += 1;
    }
    script
}
