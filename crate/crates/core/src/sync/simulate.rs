//! In-process protocol harness: one session, N clients, no network.
//!
//! Each step is delivered to the session and every resulting message is
//! delivered to its recipients' replicas before the next step, which is the
//! ordering a single command loop with FIFO connections guarantees.

use super::protocol::{ClientId, ClientMessage, Envelope, ServerMessage};
use super::replica::{Replica, ReplicaError};
use super::session::{Audience, Outgoing, Reply, Session};
use crate::score::Score;

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    /// Client `index` connects.
    Hello { client: usize },
    Send { client: usize, message: ClientMessage },
    /// The transport timer fires after `wall_ms`.
    Advance { wall_ms: u64 },
}

#[derive(Debug)]
pub struct Simulation {
    pub session: Session,
    ids: Vec<Option<ClientId>>,
    pub replicas: Vec<Option<Replica>>,
    /// Accepted messages, formatted exactly as the session log would be.
    pub log: Vec<String>,
    /// Revisions of state-changing broadcasts, in delivery order.
    pub broadcast_revs: Vec<u64>,
    /// Revisions each client has seen on state-changing messages.
    pub seen_revs: Vec<Vec<u64>>,
    pub rejected: usize,
    pub replica_errors: Vec<(usize, ReplicaError)>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("rev", &self.rev()).field("clients", self.clients()).finish()
    }
}

impl Simulation {
    pub fn new(clients: usize, initial: Score, id_seed: u64) -> Self {
        let session = Session::new(initial, id_seed);
        let header = Envelope::new(
            session.rev(),
            ServerMessage::ScoreReplaced {
                client: String::new(),
                score: session.score().clone(),
                constraints: None,
                transport: session.transport_snapshot(),
            },
        );
        Simulation {
            log: vec![header.to_json()],
            session,
            ids: vec![None; clients],
            replicas: vec![None; clients],
            broadcast_revs: Vec::new(),
            seen_revs: vec![Vec::new(); clients],
            rejected: 0,
            replica_errors: Vec::new(),
        }
    }

    pub fn client_id(&self, index: usize) -> Option<&ClientId> {
        self.ids[index].as_ref()
    }

    pub fn step(&mut self, step: Step) {
        let reply = match step {
            Step::Hello { client } => match self.session.hello(None) {
                Ok(reply) => {
                    self.ids[client] = reply.registered.clone();
                    reply
                }
                Err(_) => {
                    self.rejected += 1;
                    return;
                }
            },
            Step::Send { client, message } => {
                let Some(id) = self.ids[client].clone() else {
                    self.rejected += 1;
                    return;
                };
                self.session.handle(&id, message)
            }
            Step::Advance { wall_ms } => self.session.advance(wall_ms),
        };
        self.deliver(reply);
    }

    fn deliver(&mut self, reply: Reply) {
        if let Some(entry) = &reply.accepted {
            self.log.push(entry.to_json());
        } else if reply.outgoing.iter().any(|o| matches!(o.envelope.message, ServerMessage::Error { .. })) {
            self.rejected += 1;
        }
        for Outgoing { to, envelope } in reply.outgoing {
            // Exercise the wire encoding on every delivery.
            let envelope = super::protocol::ServerEnvelope::from_json(&envelope.to_json())
                .expect("server messages decode");
            if envelope.message.changes_state() {
                self.broadcast_revs.push(envelope.rev);
            }
            for index in 0..self.ids.len() {
                let Some(id) = &self.ids[index] else { continue };
                if let Audience::Only(target) = &to {
                    if target != id {
                        continue;
                    }
                }
                let result = match (&mut self.replicas[index], &envelope.message) {
                    (slot @ None, ServerMessage::Welcome { .. }) => {
                        Replica::from_welcome(&envelope).map(|r| *slot = Some(r))
                    }
                    (None, _) => Ok(()),
                    (Some(replica), _) => replica.apply(&envelope),
                };
                if envelope.message.changes_state() {
                    self.seen_revs[index].push(envelope.rev);
                }
                if let Err(e) = result {
                    self.replica_errors.push((index, e));
                }
            }
        }
    }

    pub fn outcome(&self) -> SimOutcome {
        SimOutcome {
            server_rev: self.session.rev(),
            server_document: self.session.canonical_score(),
            replicas: self
                .replicas
                .iter()
                .map(|r| r.as_ref().map(|r| (r.rev, r.canonical_score())))
                .collect(),
            log: self.log.clone(),
            broadcast_revs: self.broadcast_revs.clone(),
            seen_revs: self.seen_revs.clone(),
            replica_errors: self.replica_errors.len(),
        }
    }
}

/// Final observable state of a simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub server_rev: u64,
    pub server_document: String,
    /// Per client: `(rev, canonical score)`, or `None` if it never connected.
    pub replicas: Vec<Option<(u64, String)>>,
    pub log: Vec<String>,
    pub broadcast_revs: Vec<u64>,
    pub seen_revs: Vec<Vec<u64>>,
    pub replica_errors: usize,
}

impl SimOutcome {
    /// Every connected replica holds the server's revision and bytes.
    pub fn converged(&self) -> bool {
        self.replicas
            .iter()
            .flatten()
            .all(|(rev, doc)| *rev == self.server_rev && *doc == self.server_document)
            && self.replica_errors == 0
    }
}

/// Runs `script` against a fresh session with `clients` client slots.
pub fn run_simulated(clients: usize, initial: Score, id_seed: u64, script: &[Step]) -> SimOutcome {
    let mut sim = Simulation::new(clients, initial, id_seed);
    for step in script {
        sim.step(step.clone());
    }
    sim.outcome()
}
