//! The central parameter exchanger.
//!
//! An acceptor thread admits connections into a FIFO queue drained by a
//! fixed pool of handler threads. Each handler serves one connection at a
//! time and applies the master side of the elastic update for every
//! EXCHANGE_REQ it reads. Connections beyond the pool size wait in the
//! queue until a handler frees up.

mod client;
mod master;

use std::collections::HashMap;
use std::io::{self, ErrorKind, Read};
use std::net::{IpAddr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

pub use client::{ExchangerClient, RemoteConfig, RemoteStats};
pub use master::UpdateMode;

use master::MasterParams;

use crate::error::{invalid, Result};
use crate::optim::{Model, ParamVector};
use crate::protocol::{read_message, write_message, ErrorCode, Message, WireError};

pub const DEFAULT_POOL_SIZE: usize = 8;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30);
const POLL_INTERVAL: Duration = Duration::from_millis(50);
const LINGER: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangerConfig {
    /// `host:port`; port 0 picks a free port.
    pub bind_address: String,
    pub pool_size: usize,
    pub alpha: f64,
    pub update_mode: UpdateMode,
    pub model: Model,
    pub init_seed: u64,
    /// Overrides the seeded initialization when set.
    #[serde(skip)]
    pub initial_params: Option<ParamVector>,
    /// Connections with no traffic for this long are closed.
    pub idle_timeout: Duration,
    /// Keep a start/end record of every exchange (test instrumentation).
    #[serde(skip)]
    pub record_trace: bool,
}

impl ExchangerConfig {
    pub fn new(bind_address: impl Into<String>, model: Model, alpha: f64) -> Self {
        Self {
            bind_address: bind_address.into(),
            pool_size: DEFAULT_POOL_SIZE,
            alpha,
            update_mode: UpdateMode::Locked,
            model,
            init_seed: 0,
            initial_params: None,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(invalid("pool_size must be at least 1"));
        }
        crate::optim::validate_alpha(self.alpha)?;
        if !(self.alpha as f32 > 0.0 && (self.alpha as f32) < 1.0) {
            return Err(invalid("alpha rounds outside (0, 1) in f32"));
        }
        if let Some(p) = &self.initial_params {
            p.ensure_dim(self.model.param_dim())?;
        }
        Ok(())
    }
}

/// Wall-clock interval of one completed exchange.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeSpan {
    pub start: Instant,
    pub end: Instant,
}

#[derive(Debug, Clone)]
pub struct ExchangerStats {
    pub exchange_count: u64,
    /// Connections admitted but not yet picked up by a handler.
    pub queue_depth: usize,
    pub uptime: Duration,
    /// Last connection time per peer host.
    pub last_contact: HashMap<IpAddr, Instant>,
}

struct Shared {
    master: MasterParams,
    alpha: f32,
    model_fingerprint: u64,
    exchange_count: AtomicU64,
    queue_depth: AtomicUsize,
    started: Instant,
    shutting_down: AtomicBool,
    idle_timeout: Duration,
    last_contact: Mutex<HashMap<IpAddr, Instant>>,
    trace: Option<Mutex<Vec<ExchangeSpan>>>,
}

impl Shared {
    fn stats_message(&self) -> Message {
        Message::StatsResp {
            exchange_count: self.exchange_count.load(Ordering::SeqCst),
            queue_depth: self.queue_depth.load(Ordering::SeqCst) as u32,
            uptime_ms: self.started.elapsed().as_millis() as u64,
        }
    }

    fn handle_request(&self, msg: Message) -> Message {
        if self.shutting_down.load(Ordering::SeqCst) {
            return Message::error(ErrorCode::ShuttingDown, "exchanger is shutting down");
        }
        match msg {
            Message::Hello => Message::Config {
                param_dim: self.master.dim() as u32,
                alpha: self.alpha,
                model_fingerprint: self.model_fingerprint,
            },
            Message::FetchInit => Message::InitParams(self.master.snapshot()),
            Message::StatsReq => self.stats_message(),
            Message::ExchangeReq(worker) => self.exchange(&worker),
            other => Message::error(
                ErrorCode::BadFrame,
                format!("message type {:#04x} is not a request", other.msg_type()),
            ),
        }
    }

    fn exchange(&self, worker: &[f32]) -> Message {
        let dim = self.master.dim();
        if worker.len() != dim {
            return Message::error(
                ErrorCode::DimMismatch,
                format!("expected {dim} parameters, got {}", worker.len()),
            );
        }
        if let Some(i) = worker.iter().position(|v| !v.is_finite()) {
            return Message::error(ErrorCode::NonFinite, format!("element {i} is not finite"));
        }
        let start = Instant::now();
        let updated = self.master.exchange(worker, self.alpha);
        let end = Instant::now();
        if let Some(trace) = &self.trace {
            trace
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .push(ExchangeSpan { start, end });
        }
        self.exchange_count.fetch_add(1, Ordering::SeqCst);
        Message::ExchangeResp(updated)
    }
}

/// Running exchanger. Dropping the handle shuts the service down.
pub struct ExchangerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
    handlers: Vec<JoinHandle<()>>,
}

/// Binds the listener, initializes the master and starts the handler pool.
pub fn serve(config: ExchangerConfig) -> Result<ExchangerHandle> {
    config.validate()?;
    let listener = TcpListener::bind(&config.bind_address)?;
    let addr = listener.local_addr()?;
    let init = config
        .initial_params
        .clone()
        .unwrap_or_else(|| config.model.init(config.init_seed));
    let shared = Arc::new(Shared {
        master: MasterParams::new(init, config.update_mode),
        alpha: config.alpha as f32,
        model_fingerprint: config.model.fingerprint(),
        exchange_count: AtomicU64::new(0),
        queue_depth: AtomicUsize::new(0),
        started: Instant::now(),
        shutting_down: AtomicBool::new(false),
        idle_timeout: config.idle_timeout,
        last_contact: Mutex::new(HashMap::new()),
        trace: config.record_trace.then(|| Mutex::new(Vec::new())),
    });

    let (tx, rx) = crossbeam_channel::unbounded::<TcpStream>();
    let handlers = (0..config.pool_size)
        .map(|i| {
            let rx = rx.clone();
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name(format!("exchange-{i}"))
                .spawn(move || handler_loop(rx, shared))
        })
        .collect::<io::Result<Vec<_>>>()?;
    let acceptor = {
        let shared = Arc::clone(&shared);
        thread::Builder::new()
            .name("exchange-accept".into())
            .spawn(move || accept_loop(listener, tx, shared))?
    };
    info!(
        "exchanger listening on {addr} (model {}, {} params, pool {}, {:?})",
        config.model,
        config.model.param_dim(),
        config.pool_size,
        config.update_mode
    );
    Ok(ExchangerHandle {
        addr,
        shared,
        acceptor: Some(acceptor),
        handlers,
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<TcpStream>, shared: Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.shutting_down.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(stream) => {
                if let Ok(peer) = stream.peer_addr() {
                    shared
                        .last_contact
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .insert(peer.ip(), Instant::now());
                }
                shared.queue_depth.fetch_add(1, Ordering::SeqCst);
                if tx.send(stream).is_err() {
                    break;
                }
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

fn handler_loop(rx: Receiver<TcpStream>, shared: Arc<Shared>) {
    while let Ok(stream) = rx.recv() {
        shared.queue_depth.fetch_sub(1, Ordering::SeqCst);
        if let Err(e) = serve_connection(&stream, &shared) {
            debug!("connection closed: {e}");
        }
        let _ = stream.shutdown(Shutdown::Both);
    }
}

/// Blocking reads that survive the short socket timeout used to poll for
/// shutdown and idleness.
struct PatientReader<'a> {
    stream: &'a TcpStream,
    shared: &'a Shared,
    last_activity: Instant,
}

impl Read for PatientReader<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        loop {
            match (&*self.stream).read(buf) {
                Ok(n) => {
                    self.last_activity = Instant::now();
                    return Ok(n);
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    if self.shared.shutting_down.load(Ordering::SeqCst) {
                        return Err(io::Error::other("shutting down"));
                    }
                    if self.last_activity.elapsed() >= self.shared.idle_timeout {
                        return Err(io::Error::new(ErrorKind::TimedOut, "idle timeout"));
                    }
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
    }
}

/// Half-closes and discards unread input for a short while, so closing with
/// bytes still in the receive buffer does not reset the connection before
/// the peer has read the ERROR reply.
fn linger(stream: &TcpStream) {
    let _ = stream.shutdown(Shutdown::Write);
    let deadline = Instant::now() + LINGER;
    let mut sink = [0u8; 8192];
    while Instant::now() < deadline {
        match (&*stream).read(&mut sink) {
            Ok(0) => return,
            Ok(_) => {}
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                ) => {}
            Err(_) => return,
        }
    }
}

fn serve_connection(stream: &TcpStream, shared: &Shared) -> io::Result<()> {
    stream.set_read_timeout(Some(POLL_INTERVAL))?;
    stream.set_nodelay(true)?;
    let mut reader = PatientReader {
        stream,
        shared,
        last_activity: Instant::now(),
    };
    let mut writer = stream;
    loop {
        match read_message(&mut reader) {
            Ok(None) => return Ok(()),
            Ok(Some(msg)) => {
                let reply = shared.handle_request(msg);
                write_message(&mut writer, &reply)?;
            }
            Err(WireError::Io(e)) => return Err(e),
            Err(e) => {
                let code = e.code().unwrap_or(ErrorCode::BadFrame);
                write_message(&mut writer, &Message::error(code, e.to_string()))?;
                if !e.is_recoverable() {
                    linger(stream);
                    return Ok(());
                }
            }
        }
    }
}

impl ExchangerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Snapshot of the master vector, under the same consistency regime as
    /// the update mode.
    pub fn fetch_initial(&self) -> ParamVector {
        ParamVector::from_vec_unchecked(self.shared.master.snapshot())
    }

    pub fn stats(&self) -> ExchangerStats {
        ExchangerStats {
            exchange_count: self.shared.exchange_count.load(Ordering::SeqCst),
            queue_depth: self.shared.queue_depth.load(Ordering::SeqCst),
            uptime: self.shared.started.elapsed(),
            last_contact: self
                .shared
                .last_contact
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .clone(),
        }
    }

    /// Recorded exchange intervals, in completion order. Empty unless
    /// `record_trace` was set.
    pub fn trace(&self) -> Vec<ExchangeSpan> {
        self.shared
            .trace
            .as_ref()
            .map(|t| t.lock().unwrap_or_else(|e| e.into_inner()).clone())
            .unwrap_or_default()
    }

    /// Stops accepting, lets handlers finish the request in progress and
    /// joins every thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.shutting_down.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake the acceptor
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(acceptor) = self.acceptor.take() {
            let _ = acceptor.join();
        }
        for h in self.handlers.drain(..) {
            let _ = h.join();
        }
        info!("exchanger on {} stopped", self.addr);
    }
}

impl Drop for ExchangerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}
