//! Shared session state and its wire protocol.
//!
//! One [`Session`] owns the score and transport. Every client message is
//! handled to completion before the next one; accepted state changes bump
//! the revision by one and are broadcast to all clients, rejected ones get an
//! `Error` reply and change nothing. A [`Replica`] that applies the
//! broadcasts in order holds the same canonical score bytes as the server.

mod log;
mod protocol;
mod replica;
mod session;
mod simulate;

pub use log::{replay_log, ReplayError, SessionLog};
pub use protocol::{
    ClientEnvelope, ClientId, ClientMessage, Envelope, ErrorCode, EventKind, ProtocolError, ServerEnvelope,
    ServerMessage, TransportCommand,
};
pub use replica::{Replica, ReplicaError};
pub use session::{Audience, Outgoing, Reply, Session};
pub use simulate::{run_simulated, SimOutcome, Simulation, Step};
