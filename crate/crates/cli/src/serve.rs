//! The shared-session server.
//!
//! One task owns the [`Session`] and consumes an ordered queue of commands
//! from connection tasks and the transport timer. Replies fan out to the
//! connections' outbound queues; transport emissions go to a separate OSC
//! thread so a slow or dead instrument never holds up the session.

use std::collections::HashMap;
use std::fs;
use std::io::ErrorKind;
use std::sync::mpsc as std_mpsc;
use std::thread;
use std::time::Duration;

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use john_core::osc::OscSender;
use john_core::score::parse_score;
use john_core::sync::{Audience, ClientEnvelope, ClientId, ClientMessage, Envelope, ErrorCode, Reply, ServerMessage, Session, SessionLog};
use john_core::transport::Emission;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::time::{self, Instant, MissedTickBehavior};

use crate::offline::read_constraints;
use crate::ServeArgs;

type ConnId = u64;

enum Command {
    Connect { outbound: mpsc::UnboundedSender<String>, id: oneshot::Sender<ConnId> },
    Frame { conn: ConnId, text: String },
    Disconnect { conn: ConnId },
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    client_timeout: Duration,
}

pub fn run(args: ServeArgs) -> Result<std::process::ExitCode> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(args))?;
    Ok(std::process::ExitCode::SUCCESS)
}

fn initial_session(args: &ServeArgs) -> Result<Session> {
    let score = match &args.score {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_score(&text).with_context(|| format!("parsing score {}", path.display()))?
        }
        None => john_core::score::Score::empty(),
    };
    let seed = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    let mut session = Session::new(score, seed);
    if let Some(path) = &args.constraints {
        session.set_constraints(Some(read_constraints(path)?));
    }
    Ok(session)
}

async fn serve(args: ServeArgs) -> Result<()> {
    let session = initial_session(&args)?;
    let log = match &args.log {
        Some(path) => Some(SessionLog::create(path, &session).with_context(|| format!("creating {}", path.display()))?),
        None => None,
    };
    let osc = OscSender::new(&args.osc).context("opening the OSC socket")?;

    let listener = match TcpListener::bind((args.host.as_str(), args.port)).await {
        Ok(l) => l,
        Err(e) if e.kind() == ErrorKind::AddrInUse => anyhow::bail!("port {} is already in use", args.port),
        Err(e) => return Err(e).with_context(|| format!("binding {}:{}", args.host, args.port)),
    };
    let addr = listener.local_addr()?;
    // Scripts read this line to find the port when started with --port 0.
    println!("listening on {addr}");
    log::info!("listening on ws://{addr}/ws; OSC to {} endpoint(s)", args.osc.len());

    let (commands, queue) = mpsc::unbounded_channel();
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let period = Duration::from_millis(1000 / args.tick_hz as u64);
    let session_loop = tokio::spawn(command_loop(session, queue, log, spawn_osc(osc), period, shutdown_rx));

    let state = AppState { commands, client_timeout: Duration::from_secs(args.client_timeout) };
    let app = Router::new().route("/ws", get(upgrade)).with_state(state);
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;

    let _ = shutdown_tx.send(());
    session_loop.await?;
    log::info!("stopped");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
}

fn spawn_osc(sender: OscSender) -> std_mpsc::Sender<Emission> {
    let (tx, rx) = std_mpsc::channel::<Emission>();
    thread::spawn(move || {
        for emission in rx {
            sender.send_emission(&emission);
        }
    });
    tx
}

struct Connections {
    outbound: HashMap<ConnId, mpsc::UnboundedSender<String>>,
    client_of: HashMap<ConnId, ClientId>,
    conn_of: HashMap<ClientId, ConnId>,
    next: ConnId,
}

impl Connections {
    fn send(&self, conn: ConnId, text: String) {
        if let Some(tx) = self.outbound.get(&conn) {
            let _ = tx.send(text);
        }
    }

    fn deliver(&self, reply: &Reply) {
        for out in &reply.outgoing {
            let text = out.envelope.to_json();
            match &out.to {
                Audience::All => {
                    for conn in self.client_of.keys() {
                        self.send(*conn, text.clone());
                    }
                }
                Audience::Only(client) => {
                    if let Some(conn) = self.conn_of.get(client) {
                        self.send(*conn, text);
                    }
                }
            }
        }
    }
}

async fn command_loop(
    mut session: Session,
    mut queue: mpsc::UnboundedReceiver<Command>,
    mut log: Option<SessionLog>,
    osc: std_mpsc::Sender<Emission>,
    period: Duration,
    mut shutdown: oneshot::Receiver<()>,
) {
    let mut conns = Connections { outbound: HashMap::new(), client_of: HashMap::new(), conn_of: HashMap::new(), next: 1 };
    let mut timer = time::interval(period);
    timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut last = Instant::now();

    loop {
        let reply = tokio::select! {
            _ = &mut shutdown => break,
            _ = timer.tick() => catch_up(&mut session, &mut last),
            command = queue.recv() => {
                let Some(command) = command else { break };
                let pending = catch_up(&mut session, &mut last);
                finish(&conns, &mut log, &osc, pending);
                match command {
                    Command::Connect { outbound, id } => {
                        let conn = conns.next;
                        conns.next += 1;
                        conns.outbound.insert(conn, outbound);
                        let _ = id.send(conn);
                        continue;
                    }
                    Command::Disconnect { conn } => {
                        conns.outbound.remove(&conn);
                        if let Some(client) = conns.client_of.remove(&conn) {
                            conns.conn_of.remove(&client);
                            session.disconnect(&client);
                            log::info!("client {client} left");
                        }
                        continue;
                    }
                    Command::Frame { conn, text } => frame(&mut session, &mut conns, conn, &text),
                }
            }
        };
        finish(&conns, &mut log, &osc, reply);
    }
    if let Some(log) = &mut log {
        if let Err(e) = log.flush() {
            log::error!("flushing the session log: {e}");
        }
    }
}

/// Brings the playhead up to the present, so commands act at the true
/// current position. Sub-millisecond remainders carry over.
fn catch_up(session: &mut Session, last: &mut Instant) -> Reply {
    let ms = last.elapsed().as_millis() as u64;
    *last += Duration::from_millis(ms);
    session.advance(ms)
}

fn finish(
    conns: &Connections,
    log: &mut Option<SessionLog>,
    osc: &std_mpsc::Sender<Emission>,
    reply: Reply,
) {
    if let (Some(log), Some(entry)) = (log.as_mut(), &reply.accepted) {
        if let Err(e) = log.append(entry) {
            log::error!("writing the session log: {e}");
        }
    }
    conns.deliver(&reply);
    for e in reply.emissions {
        let _ = osc.send(e);
    }
}

fn error_frame(rev: u64, code: ErrorCode, message: String) -> String {
    Envelope::new(rev, ServerMessage::Error { code, message }).to_json()
}

fn frame(session: &mut Session, conns: &mut Connections, conn: ConnId, text: &str) -> Reply {
    let envelope = match ClientEnvelope::from_json(text) {
        Ok(envelope) => envelope,
        Err(e) => {
            conns.send(conn, error_frame(session.rev(), ErrorCode::BadMessage, e.to_string()));
            return Reply::default();
        }
    };
    match (conns.client_of.get(&conn).cloned(), envelope.message) {
        (None, ClientMessage::Hello { client }) => match session.hello(client) {
            Ok(reply) => {
                if let Some(client) = &reply.registered {
                    log::info!("client {client} joined");
                    conns.client_of.insert(conn, client.clone());
                    conns.conn_of.insert(client.clone(), conn);
                }
                reply
            }
            Err((code, message)) => {
                conns.send(conn, error_frame(session.rev(), code, message));
                Reply::default()
            }
        },
        (None, _) => {
            conns.send(conn, error_frame(session.rev(), ErrorCode::NotRegistered, "send Hello first".into()));
            Reply::default()
        }
        (Some(client), message) => session.handle(&client, message),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: AppState) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    let (id_tx, id_rx) = oneshot::channel();
    if state.commands.send(Command::Connect { outbound: out_tx, id: id_tx }).is_err() {
        return;
    }
    let Ok(conn) = id_rx.await else { return };
    let (mut sink, mut stream) = socket.split();
    let mut heard = Instant::now();
    let mut watchdog = time::interval(Duration::from_secs(1).min(state.client_timeout / 3).max(Duration::from_millis(100)));
    let mut pinged = Instant::now();

    loop {
        tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    heard = Instant::now();
                    if state.commands.send(Command::Frame { conn, text }).is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => heard = Instant::now(),
            },
            outgoing = out_rx.recv() => match outgoing {
                Some(text) => {
                    if sink.send(Message::Text(text)).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            _ = watchdog.tick() => {
                if heard.elapsed() > state.client_timeout {
                    log::info!("dropping silent connection {conn}");
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
                // Browsers answer pings on their own, which keeps quiet
                // but healthy clients alive.
                if pinged.elapsed() >= state.client_timeout / 3 {
                    pinged = Instant::now();
                    if sink.send(Message::Ping(Vec::new())).await.is_err() {
                        break;
                    }
                }
            }
        }
    }
    let _ = state.commands.send(Command::Disconnect { conn });
}
