//! Wire messages: UTF-8 JSON, one per WebSocket frame.
//!
//! ```text
//! {"type":"<name>","rev":<int>,"payload":{...}}
//! ```
//!
//! Client to server: `Hello`, `GenerateScore`, `EditScore`, `Transport`
//! (with `rev` = last revision the client has seen, advisory).
//! Server to client: `Welcome`, `ScoreReplaced`, `ScoreDelta`, `Transport`,
//! `Event`, `Tick`, `Error`.

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;
use thiserror::Error;

use crate::generator::GeneratorConstraints;
use crate::score::{Edit, Millis, Score, ScoreBlock};
use crate::transport::{Emission, TransportSnapshot};

pub type ClientId = String;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum TransportCommand {
    Play,
    Pause,
    Seek { to: Millis },
    Speed { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum ClientMessage {
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<ClientId>,
    },
    GenerateScore { constraints: GeneratorConstraints },
    EditScore { edit: Edit },
    Transport { command: TransportCommand },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Begin,
    End,
    Stopped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    BadMessage,
    NotRegistered,
    DuplicateClient,
    InvalidConstraints,
    Infeasible,
    UnknownBlock,
    WouldOverlap,
    OutOfRange,
    BadPayload,
    AlreadyPlaying,
    NotPlaying,
    SpeedOutOfRange,
    SeekOutOfRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum ServerMessage {
    Welcome {
        client: ClientId,
        score: Score,
        transport: TransportSnapshot,
        constraints: Option<GeneratorConstraints>,
    },
    ScoreReplaced {
        client: ClientId,
        score: Score,
        constraints: Option<GeneratorConstraints>,
        transport: TransportSnapshot,
    },
    /// An accepted edit, with the block as it now stands (absent after a
    /// delete or a wholesale replacement).
    ScoreDelta {
        client: ClientId,
        edit: Edit,
        block: Option<ScoreBlock>,
    },
    Transport {
        client: ClientId,
        transport: TransportSnapshot,
    },
    Event {
        kind: EventKind,
        at: Millis,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block: Option<ScoreBlock>,
    },
    Tick {
        /// Playhead in score milliseconds.
        position: f64,
        playing: bool,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    /// Event message for a transport emission; ticks map to `Tick`.
    pub fn from_emission(emission: &Emission, playing: bool, position: f64) -> ServerMessage {
        match emission {
            Emission::Begin { at, block } => {
                ServerMessage::Event { kind: EventKind::Begin, at: *at, block: Some(block.clone()) }
            }
            Emission::End { at, block } => {
                ServerMessage::Event { kind: EventKind::End, at: *at, block: Some(block.clone()) }
            }
            Emission::Stopped { at } => ServerMessage::Event { kind: EventKind::Stopped, at: *at, block: None },
            Emission::Tick { .. } => ServerMessage::Tick { position, playing },
        }
    }

    /// Whether this message carries a new revision.
    pub fn changes_state(&self) -> bool {
        matches!(
            self,
            ServerMessage::ScoreReplaced { .. } | ServerMessage::ScoreDelta { .. } | ServerMessage::Transport { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope<M> {
    pub rev: u64,
    pub message: M,
}

pub type ClientEnvelope = Envelope<ClientMessage>;
pub type ServerEnvelope = Envelope<ServerMessage>;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad message: {0}")]
    BadMessage(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct WireOut<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    rev: u64,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct Tagged<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    #[serde(borrow)]
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct WireIn {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    rev: u64,
    #[serde(default)]
    payload: Value,
}

impl<M: Serialize + for<'de> Deserialize<'de>> Envelope<M> {
    pub fn new(rev: u64, message: M) -> Self {
        Envelope { rev, message }
    }

    pub fn to_json(&self) -> String {
        // Every variant is a struct, so the tagged form always has a payload.
        let tagged = serde_json::to_string(&self.message).expect("protocol messages serialize");
        let parts: Tagged<'_> = serde_json::from_str(&tagged).expect("adjacently tagged form");
        let wire = WireOut { kind: parts.kind, rev: self.rev, payload: parts.payload };
        serde_json::to_string(&wire).expect("protocol messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let wire: WireIn = serde_json::from_str(text)?;
        let payload = match wire.payload {
            Value::Null => Value::Object(Default::default()),
            other => other,
        };
        let message = serde_json::from_value(serde_json::json!({ "type": wire.kind, "payload": payload }))?;
        Ok(Envelope { rev: wire.rev, message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{BlockId, Nuance};

    #[test]
    fn envelope_layout() {
        let env = Envelope::new(
            7,
            ClientMessage::EditScore { edit: Edit::SetNuance { target: BlockId(1), nuance: Nuance::Ff } },
        );
        assert_eq!(
            env.to_json(),
            r#"{"type":"EditScore","rev":7,"payload":{"edit":{"kind":"SetNuance","target":"00000000000000000000000000000001","nuance":"ff"}}}"#
        );
        assert_eq!(ClientEnvelope::from_json(&env.to_json()).unwrap(), env);
    }

    #[test]
    fn hello_without_payload() {
        let env = ClientEnvelope::from_json(r#"{"type":"Hello"}"#).unwrap();
        assert_eq!(env, Envelope::new(0, ClientMessage::Hello { client: None }));
        let env = ClientEnvelope::from_json(r#"{"type":"Hello","rev":0,"payload":{"client":"alto"}}"#).unwrap();
        assert_eq!(env.message, ClientMessage::Hello { client: Some("alto".into()) });
    }

    #[test]
    fn transport_commands() {
        let env = ClientEnvelope::from_json(r#"{"type":"Transport","rev":3,"payload":{"command":{"cmd":"seek","to":1500}}}"#)
            .unwrap();
        assert_eq!(env.message, ClientMessage::Transport { command: TransportCommand::Seek { to: 1500 } });
        let speed = Envelope::new(0, ClientMessage::Transport { command: TransportCommand::Speed { value: 2.0 } });
        assert!(speed.to_json().contains(r#"{"cmd":"speed","value":2.0}"#));
    }

    #[test]
    fn unknown_type_is_rejected() {
        assert!(ClientEnvelope::from_json(r#"{"type":"Dance","rev":1,"payload":{}}"#).is_err());
        assert!(ClientEnvelope::from_json("not json").is_err());
        // Server-only messages are not accepted from clients.
        assert!(ClientEnvelope::from_json(r#"{"type":"Tick","rev":1,"payload":{"position":1.0,"playing":true}}"#).is_err());
    }

    #[test]
    fn server_messages_round_trip() {
        let msgs = vec![
            ServerMessage::Tick { position: 1234.5, playing: true },
            ServerMessage::Event { kind: EventKind::Stopped, at: 10, block: None },
            ServerMessage::Error { code: ErrorCode::UnknownBlock, message: "nope".into() },
            ServerMessage::Welcome {
                client: "c1".into(),
                score: Score::empty(),
                transport: TransportSnapshot::default(),
                constraints: None,
            },
        ];
        for m in msgs {
            let env = Envelope::new(4, m);
            assert_eq!(ServerEnvelope::from_json(&env.to_json()).unwrap(), env);
        }
    }
}
