//! Headless playback: drives a transport from a clock and sends every
//! emission as OSC.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::osc::{emission_message, encode_osc, PacketSink};
use crate::score::{Millis, Score};
use crate::transport::{Emission, Transport, TransportError};

pub const DEFAULT_TICK_HZ: u32 = 20;

pub trait Clock {
    /// Milliseconds since the clock started.
    fn now_ms(&mut self) -> u64;
    fn sleep_ms(&mut self, ms: u64);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&mut self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }

    fn sleep_ms(&mut self, ms: u64) {
        thread::sleep(Duration::from_millis(ms));
    }
}

/// Time only moves when asked to.
#[derive(Default)]
pub struct VirtualClock {
    now: u64,
}

impl Clock for VirtualClock {
    fn now_ms(&mut self) -> u64 {
        self.now
    }

    fn sleep_ms(&mut self, ms: u64) {
        self.now += ms;
    }
}

#[derive(Clone, Debug)]
pub struct PlaybackOptions {
    pub speed: f64,
    pub from: Millis,
    pub tick_hz: u32,
}

impl Default for PlaybackOptions {
    fn default() -> Self {
        PlaybackOptions { speed: 1.0, from: 0, tick_hz: DEFAULT_TICK_HZ }
    }
}

#[derive(Debug, Default)]
pub struct PlaybackReport {
    pub emissions: Vec<Emission>,
    pub wall_ms: u64,
}

/// Plays `score` from `opts.from` to its end, sending each emission to `sink`.
///
/// Wall time is measured from the clock rather than assumed from the sleep
/// length, so a late wake-up never makes the playhead drift.
pub fn play_headless(
    score: Arc<Score>,
    opts: &PlaybackOptions,
    clock: &mut dyn Clock,
    sink: &mut dyn PacketSink,
) -> Result<PlaybackReport, TransportError> {
    let mut transport = Transport::new(score, 0);
    transport.set_speed(opts.speed)?;
    transport.seek(opts.from)?;
    let period = (1000 / opts.tick_hz.clamp(1, 100)) as u64;

    let mut report = PlaybackReport::default();
    let mut send = |batch: Vec<Emission>, report: &mut PlaybackReport| {
        for e in batch {
            let packet = encode_osc(&emission_message(&e)).expect("fixed addresses are valid");
            sink.send_packet(&packet);
            report.emissions.push(e);
        }
    };

    let start = clock.now_ms();
    let mut last = start;
    let batch = transport.play()?;
    send(batch, &mut report);
    send(transport.advance(0), &mut report);
    while transport.is_playing() {
        clock.sleep_ms(period);
        let now = clock.now_ms();
        let batch = transport.advance(now - last);
        last = now;
        send(batch, &mut report);
    }
    report.wall_ms = clock.now_ms() - start;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::{decode_osc, ADDR_STOP};

    #[test]
    fn empty_score_stops_at_once() {
        let mut packets: Vec<Vec<u8>> = Vec::new();
        let report =
            play_headless(Arc::new(Score::empty()), &PlaybackOptions::default(), &mut VirtualClock::default(), &mut packets)
                .unwrap();
        assert_eq!(report.wall_ms, 0);
        assert_eq!(decode_osc(packets.last().unwrap()).unwrap().address, ADDR_STOP);
    }

    #[test]
    fn speed_scales_wall_time() {
        let score = Score { duration: 10_000, tracks: vec!["a".into()], ..Score::empty() };
        let opts = PlaybackOptions { speed: 10.0, ..Default::default() };
        let mut packets: Vec<Vec<u8>> = Vec::new();
        let report = play_headless(Arc::new(score), &opts, &mut VirtualClock::default(), &mut packets).unwrap();
        assert_eq!(report.wall_ms, 1_000);
        // 1 initial tick + 20 periodic ticks + stop.
        assert_eq!(packets.len(), 22);
    }

    #[test]
    fn bad_start_is_rejected() {
        let opts = PlaybackOptions { from: 5, ..Default::default() };
        let err = play_headless(Arc::new(Score::empty()), &opts, &mut VirtualClock::default(), &mut Vec::<Vec<u8>>::new());
        assert!(matches!(err, Err(TransportError::SeekOutOfRange { .. })));
    }
}
