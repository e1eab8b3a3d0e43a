use std::collections::BTreeSet;
use std::sync::Arc;

use crate::generator::{generate, GenerateError, GeneratorConstraints};
use crate::rng::Rng;
use crate::score::{serialize_score, BlockId, Edit, EditError, Score};
use crate::transport::{Emission, Transport, TransportError, TransportSnapshot};

use super::protocol::{ClientId, ClientMessage, Envelope, ErrorCode, ServerEnvelope, ServerMessage, TransportCommand};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Audience {
    All,
    Only(ClientId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub to: Audience,
    pub envelope: ServerEnvelope,
}

/// Everything that results from handling one command.
#[derive(Debug, Default)]
pub struct Reply {
    pub outgoing: Vec<Outgoing>,
    /// Transport emissions, for the OSC output.
    pub emissions: Vec<Emission>,
    /// The message as it should be recorded in the session log, when accepted.
    pub accepted: Option<Envelope<ClientMessage>>,
    /// Set by a successful `Hello`.
    pub registered: Option<ClientId>,
}

/// The authoritative shared state.
pub struct Session {
    score: Arc<Score>,
    constraints: Option<GeneratorConstraints>,
    transport: Transport,
    rev: u64,
    clients: BTreeSet<ClientId>,
    next_client: u64,
    /// Source of ids for blocks added interactively.
    ids: Rng,
}

impl Session {
    pub fn new(score: Score, id_seed: u64) -> Self {
        let score = Arc::new(score);
        Session {
            transport: Transport::new(score.clone(), 0),
            score,
            constraints: None,
            rev: 0,
            clients: BTreeSet::new(),
            next_client: 1,
            ids: Rng::new(id_seed),
        }
    }

    /// A session resumed from a log header.
    pub(crate) fn restore(score: Score, constraints: Option<GeneratorConstraints>, rev: u64) -> Self {
        let mut session = Session::new(score, 0);
        session.transport = Transport::new(session.score.clone(), rev);
        session.constraints = constraints;
        session.rev = rev;
        session
    }

    pub fn rev(&self) -> u64 {
        self.rev
    }

    pub fn score(&self) -> &Score {
        &self.score
    }

    pub fn canonical_score(&self) -> String {
        serialize_score(&self.score)
    }

    pub fn constraints(&self) -> Option<&GeneratorConstraints> {
        self.constraints.as_ref()
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    /// Default constraints offered to clients in `Welcome`. Not a revision.
    pub fn set_constraints(&mut self, constraints: Option<GeneratorConstraints>) {
        self.constraints = constraints;
    }

    pub fn clients(&self) -> &BTreeSet<ClientId> {
        &self.clients
    }

    fn welcome(&self, client: &ClientId) -> ServerEnvelope {
        Envelope::new(
            self.rev,
            ServerMessage::Welcome {
                client: client.clone(),
                score: (*self.score).clone(),
                transport: self.transport.snapshot(),
                constraints: self.constraints.clone(),
            },
        )
    }

    fn error(&self, to: &ClientId, code: ErrorCode, message: impl Into<String>) -> Reply {
        Reply {
            outgoing: vec![Outgoing {
                to: Audience::Only(to.clone()),
                envelope: Envelope::new(self.rev, ServerMessage::Error { code, message: message.into() }),
            }],
            ..Reply::default()
        }
    }

    /// Registers a client. A requested id is honoured unless taken.
    pub fn hello(&mut self, preferred: Option<ClientId>) -> Result<Reply, (ErrorCode, String)> {
        let client = match preferred {
            Some(id) if self.clients.contains(&id) => {
                return Err((ErrorCode::DuplicateClient, format!("client id {id:?} is already connected")));
            }
            Some(id) if id.is_empty() => return Err((ErrorCode::BadMessage, "empty client id".into())),
            Some(id) => id,
            None => loop {
                let id = format!("c{}", self.next_client);
                self.next_client += 1;
                if !self.clients.contains(&id) {
                    break id;
                }
            },
        };
        self.clients.insert(client.clone());
        Ok(Reply {
            outgoing: vec![Outgoing { to: Audience::Only(client.clone()), envelope: self.welcome(&client) }],
            accepted: Some(Envelope::new(self.rev, ClientMessage::Hello { client: Some(client.clone()) })),
            registered: Some(client),
            ..Reply::default()
        })
    }

    pub fn disconnect(&mut self, client: &ClientId) {
        self.clients.remove(client);
    }

    /// Handles a message from a registered client.
    pub fn handle(&mut self, from: &ClientId, message: ClientMessage) -> Reply {
        if !self.clients.contains(from) {
            return self.error(from, ErrorCode::NotRegistered, "send Hello first");
        }
        match message {
            ClientMessage::Hello { .. } => self.error(from, ErrorCode::BadMessage, "already registered"),
            ClientMessage::GenerateScore { constraints } => self.generate(from, constraints),
            ClientMessage::EditScore { edit } => self.edit(from, edit),
            ClientMessage::Transport { command } => self.transport_command(from, command),
        }
    }

    fn generate(&mut self, from: &ClientId, constraints: GeneratorConstraints) -> Reply {
        let score = match generate(&constraints) {
            Ok(score) => score,
            Err(e @ GenerateError::Constraints(_)) => {
                return self.error(from, ErrorCode::InvalidConstraints, e.to_string())
            }
            Err(e @ GenerateError::Infeasible(_)) => return self.error(from, ErrorCode::Infeasible, e.to_string()),
        };
        self.rev += 1;
        let score = Arc::new(score);
        self.score = score.clone();
        let emissions = self.transport.load(score.clone(), self.rev);
        self.constraints = Some(constraints.clone());

        let mut reply = Reply {
            accepted: Some(Envelope::new(self.rev, ClientMessage::GenerateScore { constraints: constraints.clone() })),
            ..Reply::default()
        };
        reply.outgoing.push(self.broadcast(ServerMessage::ScoreReplaced {
            client: from.clone(),
            score: (*score).clone(),
            constraints: Some(constraints),
            transport: self.transport.snapshot(),
        }));
        self.push_emissions(&mut reply, emissions);
        reply
    }

    fn edit(&mut self, from: &ClientId, edit: Edit) -> Reply {
        let edit = self.resolve(edit);
        let next = match self.score.apply_edit(&edit) {
            Ok(next) => next,
            Err(e) => {
                let code = match e {
                    EditError::UnknownBlock(_) => ErrorCode::UnknownBlock,
                    EditError::WouldOverlap { .. } => ErrorCode::WouldOverlap,
                    EditError::OutOfRange { .. } => ErrorCode::OutOfRange,
                    EditError::BadPayload(_) => ErrorCode::BadPayload,
                };
                return self.error(from, code, e.to_string());
            }
        };
        self.rev += 1;
        let next = Arc::new(next);
        self.score = next.clone();
        let emissions = self.transport.replace_score(next.clone(), self.rev);
        let block = edit.target().and_then(|id| next.block(id).cloned());

        let mut reply = Reply {
            accepted: Some(Envelope::new(self.rev, ClientMessage::EditScore { edit: edit.clone() })),
            ..Reply::default()
        };
        reply.outgoing.push(self.broadcast(ServerMessage::ScoreDelta { client: from.clone(), edit, block }));
        self.push_emissions(&mut reply, emissions);
        reply
    }

    /// Gives a fresh id to blocks added without one.
    fn resolve(&mut self, edit: Edit) -> Edit {
        match edit {
            Edit::AddBlock { mut block } if block.id.is_none() => {
                let id = loop {
                    let id = BlockId::from_halves(self.ids.next_u64(), self.ids.next_u64());
                    if self.score.block(id).is_none() {
                        break id;
                    }
                };
                block.id = Some(id);
                Edit::AddBlock { block }
            }
            other => other,
        }
    }

    fn transport_command(&mut self, from: &ClientId, command: TransportCommand) -> Reply {
        let result = match &command {
            TransportCommand::Play => self.transport.play(),
            TransportCommand::Pause => self.transport.pause().map(|_| Vec::new()),
            TransportCommand::Seek { to } => self.transport.seek(*to),
            TransportCommand::Speed { value } => self.transport.set_speed(*value).map(|_| Vec::new()),
        };
        let emissions = match result {
            Ok(emissions) => emissions,
            Err(e) => {
                let code = match e {
                    TransportError::AlreadyPlaying => ErrorCode::AlreadyPlaying,
                    TransportError::NotPlaying => ErrorCode::NotPlaying,
                    TransportError::SpeedOutOfRange(_) => ErrorCode::SpeedOutOfRange,
                    TransportError::SeekOutOfRange { .. } => ErrorCode::SeekOutOfRange,
                };
                return self.error(from, code, e.to_string());
            }
        };
        self.rev += 1;
        let mut reply = Reply {
            accepted: Some(Envelope::new(self.rev, ClientMessage::Transport { command })),
            ..Reply::default()
        };
        reply.outgoing.push(self.broadcast(ServerMessage::Transport {
            client: from.clone(),
            transport: self.transport.snapshot(),
        }));
        self.push_emissions(&mut reply, emissions);
        reply
    }

    /// Moves the shared playhead by `wall_dt` wall milliseconds. Produces
    /// events and a tick but no new revision.
    pub fn advance(&mut self, wall_dt: u64) -> Reply {
        let emissions = self.transport.advance(wall_dt);
        let mut reply = Reply::default();
        self.push_emissions(&mut reply, emissions);
        reply
    }

    pub fn transport_snapshot(&self) -> TransportSnapshot {
        self.transport.snapshot()
    }

    fn broadcast(&self, message: ServerMessage) -> Outgoing {
        Outgoing { to: Audience::All, envelope: Envelope::new(self.rev, message) }
    }

    fn push_emissions(&self, reply: &mut Reply, emissions: Vec<Emission>) {
        let playing = self.transport.is_playing();
        let position = self.transport.playhead();
        for e in &emissions {
            reply.outgoing.push(self.broadcast(ServerMessage::from_emission(e, playing, position)));
        }
        reply.emissions = emissions;
    }

    /// Re-applies one accepted message from a session log.
    ///
    /// Timer-driven advances are not logged, so transport commands may no
    /// longer apply (e.g. `Play` after playback ran to the end); those are
    /// skipped. The revision is taken from the log.
    pub(crate) fn replay(&mut self, entry: Envelope<ClientMessage>) -> Result<(), String> {
        match entry.message {
            ClientMessage::Hello { client } => {
                if let Some(client) = client {
                    self.clients.insert(client);
                }
                return Ok(());
            }
            ClientMessage::GenerateScore { constraints } => {
                let score = generate(&constraints).map_err(|e| e.to_string())?;
                let score = Arc::new(score);
                self.score = score.clone();
                self.transport.load(score, entry.rev);
                self.constraints = Some(constraints);
            }
            ClientMessage::EditScore { edit } => {
                let next = Arc::new(self.score.apply_edit(&edit).map_err(|e| e.to_string())?);
                self.score = next.clone();
                self.transport.replace_score(next, entry.rev);
            }
            ClientMessage::Transport { command } => {
                let _ = match command {
                    TransportCommand::Play => self.transport.play().map(|_| ()),
                    TransportCommand::Pause => self.transport.pause(),
                    TransportCommand::Seek { to } => self.transport.seek(to).map(|_| ()),
                    TransportCommand::Speed { value } => self.transport.set_speed(value),
                };
            }
        }
        self.rev = entry.rev;
        Ok(())
    }
}
