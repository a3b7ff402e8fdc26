//! Framed binary protocol between workers and the exchanger.
//!
//! Every frame is a 10-byte little-endian header followed by the payload:
//!
//! ```text
//! u32 magic 0x44535052 ("DSPR") | u8 version = 1 | u8 msg_type | u32 payload_len
//! ```
//!
//! | type | message        | payload                                   |
//! |------|----------------|-------------------------------------------|
//! | 0x01 | HELLO          | empty                                     |
//! | 0x02 | CONFIG         | u32 param_dim, f32 alpha, u64 fingerprint |
//! | 0x03 | FETCH_INIT     | empty                                     |
//! | 0x04 | INIT_PARAMS    | u32 dim, dim x f32                        |
//! | 0x05 | EXCHANGE_REQ   | u32 dim, dim x f32                        |
//! | 0x06 | EXCHANGE_RESP  | u32 dim, dim x f32                        |
//! | 0x07 | STATS_REQ      | empty                                     |
//! | 0x08 | STATS_RESP     | u64 exchange_count, u32 queue_depth, u64 uptime_ms |
//! | 0x7F | ERROR          | u16 code, UTF-8 message                   |

use std::fmt;
use std::io::{self, ErrorKind, Read, Write};

pub const MAGIC: u32 = 0x4453_5052;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
/// Frames announcing a larger payload are rejected before any allocation.
pub const MAX_PAYLOAD: u32 = 256 << 20;

pub mod msg_type {
    pub const HELLO: u8 = 0x01;
    pub const CONFIG: u8 = 0x02;
    pub const FETCH_INIT: u8 = 0x03;
    pub const INIT_PARAMS: u8 = 0x04;
    pub const EXCHANGE_REQ: u8 = 0x05;
    pub const EXCHANGE_RESP: u8 = 0x06;
    pub const STATS_REQ: u8 = 0x07;
    pub const STATS_RESP: u8 = 0x08;
    pub const ERROR: u8 = 0x7F;
}

/// Status codes carried by ERROR frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    DimMismatch = 1,
    NonFinite = 2,
    BadFrame = 3,
    ShuttingDown = 4,
}

impl ErrorCode {
    pub fn from_u16(code: u16) -> Option<Self> {
        match code {
            1 => Some(Self::DimMismatch),
            2 => Some(Self::NonFinite),
            3 => Some(Self::BadFrame),
            4 => Some(Self::ShuttingDown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello,
    Config {
        param_dim: u32,
        alpha: f32,
        model_fingerprint: u64,
    },
    FetchInit,
    InitParams(Vec<f32>),
    ExchangeReq(Vec<f32>),
    ExchangeResp(Vec<f32>),
    StatsReq,
    StatsResp {
        exchange_count: u64,
        queue_depth: u32,
        uptime_ms: u64,
    },
    Error {
        code: u16,
        message: String,
    },
}

impl Message {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Message::Error {
            code: code as u16,
            message: message.into(),
        }
    }

    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Message::Hello => HELLO,
            Message::Config { .. } => CONFIG,
            Message::FetchInit => FETCH_INIT,
            Message::InitParams(_) => INIT_PARAMS,
            Message::ExchangeReq(_) => EXCHANGE_REQ,
            Message::ExchangeResp(_) => EXCHANGE_RESP,
            Message::StatsReq => STATS_REQ,
            Message::StatsResp { .. } => STATS_RESP,
            Message::Error { .. } => ERROR,
        }
    }

    fn encode_payload(&self, out: &mut Vec<u8>) {
        match self {
            Message::Hello | Message::FetchInit | Message::StatsReq => {}
            Message::Config {
                param_dim,
                alpha,
                model_fingerprint,
            } => {
                out.extend_from_slice(&param_dim.to_le_bytes());
                out.extend_from_slice(&alpha.to_le_bytes());
                out.extend_from_slice(&model_fingerprint.to_le_bytes());
            }
            Message::InitParams(v) | Message::ExchangeReq(v) | Message::ExchangeResp(v) => {
                out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Message::StatsResp {
                exchange_count,
                queue_depth,
                uptime_ms,
            } => {
                out.extend_from_slice(&exchange_count.to_le_bytes());
                out.extend_from_slice(&queue_depth.to_le_bytes());
                out.extend_from_slice(&uptime_ms.to_le_bytes());
            }
            Message::Error { code, message } => {
                out.extend_from_slice(&code.to_le_bytes());
                out.extend_from_slice(message.as_bytes());
            }
        }
    }

    /// Full frame: header plus payload.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![0u8; HEADER_LEN];
        self.encode_payload(&mut out);
        let payload_len = (out.len() - HEADER_LEN) as u32;
        out[0..4].copy_from_slice(&MAGIC.to_le_bytes());
        out[4] = VERSION;
        out[5] = self.msg_type();
        out[6..10].copy_from_slice(&payload_len.to_le_bytes());
        out
    }

    pub fn decode_payload(msg_type: u8, payload: &[u8]) -> Result<Message, WireError> {
        use msg_type::*;
        let fixed = |n: usize| {
            if payload.len() == n {
                Ok(())
            } else {
                Err(WireError::BadPayload(format!(
                    "message type {msg_type:#04x} expects {n} payload bytes, got {}",
                    payload.len()
                )))
            }
        };
        let u32_at = |o: usize| u32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(payload[o..o + 8].try_into().unwrap());
        Ok(match msg_type {
            HELLO => fixed(0).map(|_| Message::Hello)?,
            FETCH_INIT => fixed(0).map(|_| Message::FetchInit)?,
            STATS_REQ => fixed(0).map(|_| Message::StatsReq)?,
            CONFIG => {
                fixed(16)?;
                Message::Config {
                    param_dim: u32_at(0),
                    alpha: f32::from_bits(u32_at(4)),
                    model_fingerprint: u64_at(8),
                }
            }
            INIT_PARAMS => Message::InitParams(decode_vector(payload)?),
            EXCHANGE_REQ => Message::ExchangeReq(decode_vector(payload)?),
            EXCHANGE_RESP => Message::ExchangeResp(decode_vector(payload)?),
            STATS_RESP => {
                fixed(20)?;
                Message::StatsResp {
                    exchange_count: u64_at(0),
                    queue_depth: u32_at(8),
                    uptime_ms: u64_at(12),
                }
            }
            ERROR => {
                if payload.len() < 2 {
                    return Err(WireError::BadPayload(
                        "error frame shorter than its code".into(),
                    ));
                }
                Message::Error {
                    code: u16::from_le_bytes([payload[0], payload[1]]),
                    message: String::from_utf8_lossy(&payload[2..]).into_owned(),
                }
            }
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

fn decode_vector(payload: &[u8]) -> Result<Vec<f32>, WireError> {
    if payload.len() < 4 {
        return Err(WireError::DimMismatch(
            "vector payload shorter than its length prefix".into(),
        ));
    }
    let dim = u32::from_le_bytes(payload[0..4].try_into().unwrap()) as u64;
    let body = &payload[4..];
    if body.len() as u64 != dim * 4 {
        return Err(WireError::DimMismatch(format!(
            "declared {dim} elements but carried {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Failure to read a well-formed frame.
#[derive(Debug)]
pub enum WireError {
    BadMagic(u32),
    BadVersion(u8),
    UnknownType(u8),
    PayloadTooLarge(u32),
    /// Payload does not match the fixed layout of its message type.
    BadPayload(String),
    /// Vector payload whose length prefix disagrees with its size.
    DimMismatch(String),
    /// Stream ended inside a frame.
    Truncated,
    Io(io::Error),
}

impl WireError {
    /// Status code reported back to the peer, if a reply is still possible.
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            WireError::DimMismatch(_) => Some(ErrorCode::DimMismatch),
            WireError::Io(_) => None,
            _ => Some(ErrorCode::BadFrame),
        }
    }

    /// Whether the byte stream is still aligned on a frame boundary.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            WireError::BadPayload(_) | WireError::DimMismatch(_) | WireError::UnknownType(_)
        )
    }
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::BadMagic(m) => write!(f, "bad magic {m:#010x}"),
            WireError::BadVersion(v) => write!(f, "unsupported protocol version {v}"),
            WireError::UnknownType(t) => write!(f, "unknown message type {t:#04x}"),
            WireError::PayloadTooLarge(n) => write!(f, "payload of {n} bytes exceeds limit"),
            WireError::BadPayload(m) | WireError::DimMismatch(m) => f.write_str(m),
            WireError::Truncated => f.write_str("stream ended inside a frame"),
            WireError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for WireError {}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        if e.kind() == ErrorKind::UnexpectedEof {
            WireError::Truncated
        } else {
            WireError::Io(e)
        }
    }
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream at a frame
/// boundary.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Message>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(WireError::Truncated),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(WireError::BadVersion(header[4]));
    }
    let msg_type = header[5];
    let len = u32::from_le_bytes(header[6..10].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Message::decode_payload(msg_type, &payload).map(Some)
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&msg.encode())?;
    w.flush()
}
