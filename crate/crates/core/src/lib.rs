//! Core of the John semi-conductor: timeline scores for collective
//! improvisation, generated under global constraints, edited concurrently by
//! many clients, played back on one shared playhead, and announced to
//! instruments over OSC.
//!
//! - [`score`]: the document, its JSON form and edits
//! - [`generator`]: random propositions and the constraint checker
//! - [`transport`]: the shared playhead and begin/end emissions
//! - [`osc`]: OSC 1.0 encoding and UDP output
//! - [`playback`]: headless playback to OSC
//! - [`sync`]: the authoritative session, wire protocol and replicas
//! - [`batch`]: many generations or validations at once

pub mod batch;
pub mod generator;
pub mod osc;
pub mod playback;
pub mod rng;
pub mod score;
pub mod sync;
pub mod transport;
