//! Subcommands that need no server: generate, validate, play.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use john_core::generator::{generate as generate_score, validate as validate_score, GeneratorConstraints};
use john_core::osc::{OscEndpoint, OscSender};
use john_core::playback::{play_headless, PlaybackOptions, SystemClock};
use john_core::score::{parse_document, parse_score, serialize_score};

pub fn read_constraints(path: &Path) -> Result<GeneratorConstraints> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing constraints {}", path.display()))
}

pub fn generate(constraints: &Path, seed: Option<u64>, out: &Path) -> Result<ExitCode> {
    let mut c = read_constraints(constraints)?;
    if let Some(seed) = seed {
        c = c.with_seed(seed);
    }
    let score = generate_score(&c)?;
    fs::write(out, serialize_score(&score) + "\n").with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {} blocks on {} tracks to {}", score.events.len(), score.tracks.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn validate(score: &Path, constraints: &Path, json: bool) -> Result<ExitCode> {
    let c = read_constraints(constraints)?;
    let text = fs::read_to_string(score).with_context(|| format!("reading {}", score.display()))?;
    // Broken invariants are findings here, not parse errors.
    let score = parse_document(&text).with_context(|| format!("parsing score {}", score.display()))?;
    let violations = validate_score(&score, &c);
    if json {
        let report = serde_json::json!({ "violations": violations, "count": violations.len() });
        println!("{report}");
    } else {
        for v in &violations {
            println!("{v}");
        }
        println!("{} violations", violations.len());
    }
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn play(score: &Path, speed: f64, from: u64, osc: &[OscEndpoint], tick_hz: u32) -> Result<ExitCode> {
    let text = fs::read_to_string(score).with_context(|| format!("reading {}", score.display()))?;
    let score = parse_score(&text).with_context(|| format!("parsing score {}", score.display()))?;
    if osc.is_empty() {
        log::warn!("no --osc endpoints given; playing silently");
    }
    let sender = OscSender::new(osc).context("opening the OSC socket")?;
    let opts = PlaybackOptions { speed, from, tick_hz };
    let mut sink = sender;
    let report = play_headless(Arc::new(score), &opts, &mut SystemClock::new(), &mut sink)?;
    log::info!("played {} emissions in {} ms", report.emissions.len(), report.wall_ms);
    Ok(ExitCode::SUCCESS)
}
