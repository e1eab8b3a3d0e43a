use thiserror::Error;

use crate::generator::GeneratorConstraints;
use crate::score::{serialize_score, EditError, Score};
use crate::transport::TransportSnapshot;

use super::protocol::{ClientId, EventKind, ServerEnvelope, ServerMessage};

#[derive(Debug, Error, PartialEq)]
pub enum ReplicaError {
    #[error("expected a Welcome first")]
    NotWelcomed,
    #[error("revision gap: expected {expected}, got {got}")]
    RevGap { expected: u64, got: u64 },
    #[error("broadcast edit does not apply locally: {0}")]
    Diverged(#[from] EditError),
}

/// A client's mirror of the session, kept current by applying broadcasts.
#[derive(Clone, Debug, PartialEq)]
pub struct Replica {
    pub client: ClientId,
    pub rev: u64,
    pub score: Score,
    pub constraints: Option<GeneratorConstraints>,
    pub transport: TransportSnapshot,
}

impl Replica {
    pub fn from_welcome(envelope: &ServerEnvelope) -> Result<Self, ReplicaError> {
        match &envelope.message {
            ServerMessage::Welcome { client, score, transport, constraints } => Ok(Replica {
                client: client.clone(),
                rev: envelope.rev,
                score: score.clone(),
                constraints: constraints.clone(),
                transport: transport.clone(),
            }),
            _ => Err(ReplicaError::NotWelcomed),
        }
    }

    pub fn canonical_score(&self) -> String {
        serialize_score(&self.score)
    }

    /// Applies one server message. State-changing messages must arrive in
    /// revision order without gaps.
    pub fn apply(&mut self, envelope: &ServerEnvelope) -> Result<(), ReplicaError> {
        let message = &envelope.message;
        if message.changes_state() && envelope.rev != self.rev + 1 {
            return Err(ReplicaError::RevGap { expected: self.rev + 1, got: envelope.rev });
        }
        match message {
            ServerMessage::Welcome { .. } => {
                *self = Replica::from_welcome(envelope)?;
            }
            ServerMessage::ScoreReplaced { score, constraints, transport, .. } => {
                self.score = score.clone();
                self.constraints = constraints.clone();
                self.transport = transport.clone();
            }
            ServerMessage::ScoreDelta { edit, .. } => {
                self.score = self.score.apply_edit(edit)?;
                self.transport.score_rev = envelope.rev;
            }
            ServerMessage::Transport { transport, .. } => {
                self.transport = transport.clone();
            }
            ServerMessage::Event { kind: EventKind::Stopped, .. } => {
                self.transport.playing = false;
                self.transport.position = self.score.duration as f64;
            }
            ServerMessage::Tick { position, playing } => {
                self.transport.position = *position;
                self.transport.playing = *playing;
            }
            ServerMessage::Event { .. } | ServerMessage::Error { .. } => {}
        }
        if message.changes_state() {
            self.rev = envelope.rev;
        }
        Ok(())
    }
}
