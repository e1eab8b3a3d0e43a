//! Append-only session log: one protocol envelope per line.
//!
//! The first line records the starting score as a `ScoreReplaced` at the
//! session's initial revision; every following line is an accepted client
//! message stamped with the revision it produced (with server-assigned
//! fields such as new block ids filled in).

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::protocol::{ClientEnvelope, Envelope, ProtocolError, ServerEnvelope, ServerMessage};
use super::session::Session;

pub struct SessionLog {
    out: BufWriter<File>,
}

impl SessionLog {
    /// Creates (truncating) the log and writes the header for `session`.
    pub fn create(path: &Path, session: &Session) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        let mut log = SessionLog { out: BufWriter::new(file) };
        let header = Envelope::new(
            session.rev(),
            ServerMessage::ScoreReplaced {
                client: String::new(),
                score: session.score().clone(),
                constraints: session.constraints().cloned(),
                transport: session.transport_snapshot(),
            },
        );
        writeln!(log.out, "{}", header.to_json())?;
        log.out.flush()?;
        Ok(log)
    }

    pub fn append(&mut self, entry: &ClientEnvelope) -> io::Result<()> {
        writeln!(self.out, "{}", entry.to_json())?;
        self.out.flush()
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ProtocolError },
    #[error("line 1: expected a ScoreReplaced header")]
    MissingHeader,
    #[error("line {line}: {detail}")]
    Rejected { line: usize, detail: String },
}

/// Rebuilds the session a log describes.
pub fn replay_log(text: &str) -> Result<Session, ReplayError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(ReplayError::MissingHeader)?;
    let header = ServerEnvelope::from_json(first).map_err(|source| ReplayError::Parse { line: 1, source })?;
    let ServerMessage::ScoreReplaced { score, constraints, .. } = header.message else {
        return Err(ReplayError::MissingHeader);
    };
    let mut session = Session::restore(score, constraints, header.rev);
    for (i, line) in lines {
        let entry = ClientEnvelope::from_json(line).map_err(|source| ReplayError::Parse { line: i + 1, source })?;
        session.replay(entry).map_err(|detail| ReplayError::Rejected { line: i + 1, detail })?;
    }
    Ok(session)
}
