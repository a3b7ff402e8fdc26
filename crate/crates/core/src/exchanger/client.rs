use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::optim::ParamVector;
use crate::protocol::{read_message, write_message, Message};

/// Parameters announced by the exchanger in its CONFIG reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteConfig {
    pub param_dim: u32,
    pub alpha: f32,
    pub model_fingerprint: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteStats {
    pub exchange_count: u64,
    pub queue_depth: u32,
    pub uptime_ms: u64,
}

/// One connection to an exchanger. Requests are answered in order.
pub struct ExchangerClient {
    stream: TcpStream,
}

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
// queued requests wait behind busy handlers, so replies can be slow
const REPLY_TIMEOUT: Duration = Duration::from_secs(120);

impl ExchangerClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, CONNECT_TIMEOUT) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    stream.set_read_timeout(Some(REPLY_TIMEOUT))?;
                    return Ok(Self { stream });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last
            .map(Error::Io)
            .unwrap_or_else(|| Error::Protocol("address resolved to nothing".into())))
    }

    /// Sends one frame and waits for the reply. ERROR frames become
    /// [`Error::Remote`].
    pub fn request(&mut self, msg: &Message) -> Result<Message> {
        write_message(&mut self.stream, msg)?;
        match read_message(&mut self.stream) {
            Ok(Some(Message::Error { code, message })) => Err(Error::Remote { code, message }),
            Ok(Some(reply)) => Ok(reply),
            Ok(None) => Err(Error::Protocol("exchanger closed the connection".into())),
            Err(e) => Err(Error::Protocol(e.to_string())),
        }
    }

    pub fn hello(&mut self) -> Result<RemoteConfig> {
        match self.request(&Message::Hello)? {
            Message::Config {
                param_dim,
                alpha,
                model_fingerprint,
            } => Ok(RemoteConfig {
                param_dim,
                alpha,
                model_fingerprint,
            }),
            other => Err(unexpected("CONFIG", &other)),
        }
    }

    pub fn fetch_init(&mut self) -> Result<ParamVector> {
        match self.request(&Message::FetchInit)? {
            Message::InitParams(v) => ParamVector::new(v),
            other => Err(unexpected("INIT_PARAMS", &other)),
        }
    }

    pub fn exchange(&mut self, params: &ParamVector) -> Result<ParamVector> {
        match self.request(&Message::ExchangeReq(params.as_slice().to_vec()))? {
            Message::ExchangeResp(v) => {
                let v = ParamVector::new(v)?;
                v.ensure_dim(params.dim())?;
                Ok(v)
            }
            other => Err(unexpected("EXCHANGE_RESP", &other)),
        }
    }

    pub fn stats(&mut self) -> Result<RemoteStats> {
        match self.request(&Message::StatsReq)? {
            Message::StatsResp {
                exchange_count,
                queue_depth,
                uptime_ms,
            } => Ok(RemoteStats {
                exchange_count,
                queue_depth,
                uptime_ms,
            }),
            other => Err(unexpected("STATS_RESP", &other)),
        }
    }

    pub fn stream(&self) -> &TcpStream {
        &self.stream
    }
}

fn unexpected(wanted: &str, got: &Message) -> Error {
    Error::Protocol(format!(
        "expected {wanted}, got message type {:#04x}",
        got.msg_type()
    ))
}
