//! OSC 1.0 messages for instruments and lights.
//!
//! Address scheme:
//!
//! | emission | address             | arguments                                             |
//! |----------|---------------------|-------------------------------------------------------|
//! | Tick     | `/john/time`        | `f` playhead seconds                                  |
//! | Begin    | `/john/event/begin` | `s` id, `i` track, `s` karma, `s` nuance, `f` start s, `f` duration s |
//! | End      | `/john/event/end`   | `s` id, `i` track                                     |
//! | Stopped  | `/john/stop`        | none                                                  |
//!
//! One message per UDP datagram, no bundles.

use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::str::FromStr;

use log::warn;
use thiserror::Error;

use crate::score::Millis;
use crate::transport::Emission;

pub const ADDR_TIME: &str = "/john/time";
pub const ADDR_BEGIN: &str = "/john/event/begin";
pub const ADDR_END: &str = "/john/event/end";
pub const ADDR_STOP: &str = "/john/stop";

#[derive(Clone, Debug, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
}

impl OscArg {
    fn tag(&self) -> u8 {
        match self {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        OscMessage { address: address.into(), args }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum OscError {
    #[error("bad OSC address {0:?}")]
    BadAddress(String),
    #[error("unsupported OSC type tag {0:?}")]
    UnsupportedType(char),
    #[error("string argument contains a NUL byte")]
    BadString,
    #[error("truncated or misaligned packet")]
    Truncated,
}

fn check_address(address: &str) -> Result<(), OscError> {
    let ok = address.starts_with('/')
        && address.bytes().all(|b| b.is_ascii_graphic() && b != b'#' && b != b',');
    if ok {
        Ok(())
    } else {
        Err(OscError::BadAddress(address.to_string()))
    }
}

/// Appends `bytes`, a NUL terminator and zero padding to the next multiple of 4.
fn push_padded_str(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(bytes);
    let pad = 4 - bytes.len() % 4;
    out.extend(std::iter::repeat_n(0, pad));
}

pub fn encode_osc(msg: &OscMessage) -> Result<Vec<u8>, OscError> {
    check_address(&msg.address)?;
    let mut out = Vec::with_capacity(32);
    push_padded_str(&mut out, msg.address.as_bytes());
    let mut tags = Vec::with_capacity(msg.args.len() + 1);
    tags.push(b',');
    tags.extend(msg.args.iter().map(OscArg::tag));
    push_padded_str(&mut out, &tags);
    for arg in &msg.args {
        match arg {
            OscArg::Int(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Str(s) => {
                if s.as_bytes().contains(&0) {
                    return Err(OscError::BadString);
                }
                push_padded_str(&mut out, s.as_bytes());
            }
        }
    }
    debug_assert_eq!(out.len() % 4, 0);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn padded_str(&mut self) -> Result<&'a [u8], OscError> {
        let rest = self.buf.get(self.pos..).ok_or(OscError::Truncated)?;
        let len = rest.iter().position(|&b| b == 0).ok_or(OscError::Truncated)?;
        let padded = (len / 4 + 1) * 4;
        if rest.len() < padded || rest[len..padded].iter().any(|&b| b != 0) {
            return Err(OscError::Truncated);
        }
        self.pos += padded;
        Ok(&rest[..len])
    }

    fn word(&mut self) -> Result<[u8; 4], OscError> {
        let bytes = self.buf.get(self.pos..self.pos + 4).ok_or(OscError::Truncated)?;
        self.pos += 4;
        Ok(bytes.try_into().expect("four bytes"))
    }
}

/// Decodes a single message packet (no bundles).
pub fn decode_osc(packet: &[u8]) -> Result<OscMessage, OscError> {
    if !packet.len().is_multiple_of(4) {
        return Err(OscError::Truncated);
    }
    let mut r = Reader { buf: packet, pos: 0 };
    let address = String::from_utf8(r.padded_str()?.to_vec())
        .map_err(|e| OscError::BadAddress(String::from_utf8_lossy(e.as_bytes()).into_owned()))?;
    check_address(&address)?;
    let tags = r.padded_str()?;
    if tags.first() != Some(&b',') {
        return Err(OscError::Truncated);
    }
    let mut args = Vec::with_capacity(tags.len() - 1);
    for &tag in &tags[1..] {
        args.push(match tag {
            b'i' => OscArg::Int(i32::from_be_bytes(r.word()?)),
            b'f' => OscArg::Float(f32::from_be_bytes(r.word()?)),
            b's' => OscArg::Str(String::from_utf8(r.padded_str()?.to_vec()).map_err(|_| OscError::BadString)?),
            other => return Err(OscError::UnsupportedType(other as char)),
        });
    }
    if r.pos != packet.len() {
        return Err(OscError::Truncated);
    }
    Ok(OscMessage { address, args })
}

fn seconds(ms: Millis) -> f32 {
    (ms as f64 / 1000.0) as f32
}

/// The OSC message announcing `emission`.
pub fn emission_message(emission: &Emission) -> OscMessage {
    match emission {
        Emission::Tick { at } => OscMessage::new(ADDR_TIME, vec![OscArg::Float(seconds(*at))]),
        Emission::Begin { block, .. } => OscMessage::new(
            ADDR_BEGIN,
            vec![
                OscArg::Str(block.id.to_string()),
                OscArg::Int(block.track as i32),
                OscArg::Str(block.karma.to_string()),
                OscArg::Str(block.nuance.to_string()),
                OscArg::Float(seconds(block.start)),
                OscArg::Float(seconds(block.duration)),
            ],
        ),
        Emission::End { block, .. } => OscMessage::new(
            ADDR_END,
            vec![OscArg::Str(block.id.to_string()), OscArg::Int(block.track as i32)],
        ),
        Emission::Stopped { .. } => OscMessage::new(ADDR_STOP, vec![]),
    }
}

/// A UDP destination, written `host:port`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OscEndpoint {
    pub host: String,
    pub port: u16,
}

impl fmt::Display for OscEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "[{}]:{}", self.host, self.port)
        } else {
            write!(f, "{}:{}", self.host, self.port)
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid OSC endpoint {0:?}: expected host:port")]
pub struct BadEndpoint(pub String);

impl FromStr for OscEndpoint {
    type Err = BadEndpoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadEndpoint(s.to_string());
        let (host, port) = s.rsplit_once(':').ok_or_else(bad)?;
        let host = host.strip_prefix('[').and_then(|h| h.strip_suffix(']')).unwrap_or(host);
        if host.is_empty() {
            return Err(bad());
        }
        let port = port.parse().map_err(|_| bad())?;
        Ok(OscEndpoint { host: host.to_string(), port })
    }
}

/// Pairs the message for `emission` with every endpoint.
pub fn emit(emission: &Emission, endpoints: &[OscEndpoint]) -> Vec<(OscEndpoint, OscMessage)> {
    let msg = emission_message(emission);
    endpoints.iter().map(|ep| (ep.clone(), msg.clone())).collect()
}

/// Destination for encoded packets.
pub trait PacketSink {
    fn send_packet(&mut self, packet: &[u8]);
}

/// Keeps every packet; handy for logs and tests.
impl PacketSink for Vec<Vec<u8>> {
    fn send_packet(&mut self, packet: &[u8]) {
        self.push(packet.to_vec());
    }
}

/// Sends every emission to each configured endpoint over UDP.
///
/// Failures are logged per endpoint and never propagate: a dead instrument
/// must not stop the performance.
pub struct OscSender {
    socket: UdpSocket,
    targets: Vec<(OscEndpoint, SocketAddr)>,
}

impl OscSender {
    pub fn new(endpoints: &[OscEndpoint]) -> std::io::Result<Self> {
        let mut targets = Vec::with_capacity(endpoints.len());
        for ep in endpoints {
            let addr = (ep.host.as_str(), ep.port).to_socket_addrs()?.next().ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("cannot resolve {ep}"))
            })?;
            targets.push((ep.clone(), addr));
        }
        let any_v6 = targets.iter().any(|(_, a)| a.is_ipv6());
        let socket = UdpSocket::bind(if any_v6 { "[::]:0" } else { "0.0.0.0:0" })?;
        Ok(OscSender { socket, targets })
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &OscEndpoint> {
        self.targets.iter().map(|(ep, _)| ep)
    }

    /// Number of endpoints the packet failed to reach.
    pub fn send(&self, packet: &[u8]) -> usize {
        let mut failures = 0;
        for (ep, addr) in &self.targets {
            if let Err(e) = self.socket.send_to(packet, addr) {
                warn!("OSC send to {ep} failed: {e}");
                failures += 1;
            }
        }
        failures
    }

    pub fn send_emission(&self, emission: &Emission) -> usize {
        let packet = encode_osc(&emission_message(emission)).expect("fixed addresses are valid");
        self.send(&packet)
    }
}

impl PacketSink for OscSender {
    fn send_packet(&mut self, packet: &[u8]) {
        self.send(packet);
    }
}
