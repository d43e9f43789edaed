//! Host-side client: sessions, proxies, callbacks and interruption.

mod import;
mod proxy;
mod spawn;
mod value;

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::{Duration, Instant};

use bridgewire_core::host::{translate_inbound, translate_outbound, HostData, HostTable, HostValue, TranslateError};
use bridgewire_core::runtime::Channel;
use bridgewire_core::wire::{
    read_frame, read_hello, write_frame, write_hello, Callee, Frame, HandshakeError, IoError, Sink, Source,
    PROTOCOL_VERSION,
};
use bridgewire_core::{FnTarget, Value};
use log::debug;

pub use import::{Imported, ImportedEnv, Symbol};
pub use proxy::Proxy;
pub use spawn::{discover, SpawnOptions, DEFAULT_SPAWN_TIMEOUT, SERVER_EXE_NAME};
pub use value::{double, doubles, integers, string, CallArgs, Extern, HostFn, RemoteFn, Val, ValExt};

use proxy::{ReleaseQueue, SharedQueue};
use spawn::ServerProcess;
use value::CallbackFn;

/// How long a blocked read waits before looking at the interrupt flag.
const INTERRUPT_POLL: Duration = Duration::from_millis(50);

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The server answered with FAIL.
    #[error("{message}")]
    Remote { message: String, detail: String },
    #[error("stale reference: proxy #{id} ({type_name}) belongs to an earlier epoch or another session")]
    Stale { id: u64, type_name: String },
    #[error("interrupted")]
    Interrupted,
    #[error("session is not connected: {0}")]
    Disconnected(String),
    #[error("cannot find server executable: {0}")]
    Discovery(String),
    #[error("cannot start server: {0}")]
    Spawn(String),
    #[error("cannot connect: {0}")]
    Connect(#[source] io::Error),
    #[error("handshake failed: {0}")]
    Handshake(#[from] HandshakeError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("cannot translate value: {0}")]
    Translate(#[from] TranslateError),
    #[error("{0}")]
    Usage(String),
    /// Raised by host callbacks.
    #[error("{0}")]
    Callback(String),
}

impl ClientError {
    pub fn callback(message: impl Into<String>) -> ClientError {
        ClientError::Callback(message.into())
    }

    /// Server-side detail for remote failures; empty otherwise.
    pub fn detail(&self) -> &str {
        match self {
            ClientError::Remote { detail, .. } => detail,
            _ => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Byte and frame counters for one session, handshake excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WireStats {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub frames_sent: u64,
    pub frames_received: u64,
}

/// Receives text the server printed.
pub type OutputSink = Box<dyn FnMut(Channel, &str) + Send>;
/// Observes every frame with its encoded size.
pub type FrameTap = Box<dyn FnMut(Direction, &Frame, usize) + Send>;

/// Requests interruption of a session from another thread or a signal
/// handler. The session notices within [`INTERRUPT_POLL`].
#[derive(Clone, Debug, Default)]
pub struct InterruptHandle(Arc<AtomicBool>);

impl InterruptHandle {
    pub fn interrupt(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_set(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    pub fn clear(&self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

fn std_output() -> OutputSink {
    Box::new(|ch, text| {
        let _ = match ch {
            Channel::Out => {
                let mut out = io::stdout().lock();
                out.write_all(text.as_bytes()).and_then(|_| out.flush())
            }
            Channel::Err => io::stderr().lock().write_all(text.as_bytes()),
        };
    })
}

enum Origin {
    Connected(SocketAddr),
    Spawned(SpawnOptions),
}

struct Conn {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Reads from the socket, giving up when the interrupt flag is raised.
struct InterruptibleSource<'a> {
    reader: &'a mut BufReader<TcpStream>,
    flag: &'a AtomicBool,
    deadline: Option<Instant>,
    bytes: u64,
    interrupted: bool,
}

impl Source for InterruptibleSource<'_> {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError> {
        loop {
            if self.flag.load(Ordering::SeqCst) {
                self.interrupted = true;
                return Err(IoError("interrupted".into()));
            }
            match self.reader.read(buf) {
                Ok(n) => {
                    self.bytes += n as u64;
                    return Ok(n);
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    if self.deadline.is_some_and(|d| Instant::now() >= d) {
                        return Err(IoError("timed out".into()));
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(IoError(e.to_string())),
            }
        }
    }
}

struct CountingSink<'a> {
    writer: &'a mut BufWriter<TcpStream>,
    bytes: u64,
}

impl Sink for CountingSink<'_> {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), IoError> {
        self.writer.write_all(buf).map_err(|e| IoError(e.to_string()))?;
        self.bytes += buf.len() as u64;
        Ok(())
    }
}

#[derive(Default)]
struct Callbacks {
    by_id: HashMap<u64, Weak<CallbackFn>>,
    by_key: HashMap<usize, u64>,
    next: u64,
}

impl Callbacks {
    /// Callback ids are odd; the server's object ids are even.
    fn register(&mut self, f: &HostFn) -> u64 {
        self.by_id.retain(|_, w| w.strong_count() > 0);
        let by_id = &self.by_id;
        self.by_key.retain(|_, id| by_id.contains_key(id));
        if let Some(&id) = self.by_key.get(&f.key()) {
            return id;
        }
        if self.next == 0 {
            self.next = 1;
        }
        let id = self.next;
        self.next += 2;
        self.by_id.insert(id, Arc::downgrade(&f.0));
        self.by_key.insert(f.key(), id);
        id
    }

    fn get(&self, id: u64) -> Option<HostFn> {
        self.by_id.get(&id).and_then(Weak::upgrade).map(HostFn)
    }

    fn len(&self) -> usize {
        self.by_id.values().filter(|w| w.strong_count() > 0).count()
    }
}

/// A conversation with one server runtime.
///
/// Requests are strictly nested: a callback may issue requests of its own,
/// and each is answered before the callback returns.
pub struct Session {
    id: u64,
    origin: Origin,
    conn: Option<Conn>,
    child: Option<ServerProcess>,
    epoch: u64,
    releases: SharedQueue,
    callbacks: Callbacks,
    interrupt: InterruptHandle,
    output: OutputSink,
    tap: Option<FrameTap>,
    stats: WireStats,
    depth: usize,
}

impl Session {
    fn blank(origin: Origin) -> Session {
        Session {
            id: NEXT_SESSION.fetch_add(1, Ordering::Relaxed),
            origin,
            conn: None,
            child: None,
            epoch: 1,
            releases: Arc::new(Mutex::new(ReleaseQueue { epoch: 1, ids: Vec::new() })),
            callbacks: Callbacks::default(),
            interrupt: InterruptHandle::default(),
            output: std_output(),
            tap: None,
            stats: WireStats::default(),
            depth: 0,
        }
    }

    /// Connects to a running server.
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Session, ClientError> {
        let addr = addr.to_socket_addrs().map_err(ClientError::Connect)?.next().ok_or_else(|| {
            ClientError::Connect(io::Error::new(io::ErrorKind::NotFound, "address resolves to nothing"))
        })?;
        let mut s = Session::blank(Origin::Connected(addr));
        s.open(addr)?;
        Ok(s)
    }

    /// Starts a private server process and connects to it.
    pub fn spawn() -> Result<Session, ClientError> {
        Session::spawn_with(SpawnOptions::default())
    }

    pub fn spawn_with(opts: SpawnOptions) -> Result<Session, ClientError> {
        let mut s = Session::blank(Origin::Spawned(opts));
        s.start_server()?;
        Ok(s)
    }

    /// True when a server can be found, started and spoken to.
    pub fn setup_ok(server_bin: Option<&std::path::Path>) -> bool {
        let opts = SpawnOptions { server_bin: server_bin.map(Into::into), ..SpawnOptions::default() };
        Session::spawn_with(opts).and_then(|mut s| s.eval("1")).is_ok()
    }

    fn start_server(&mut self) -> Result<(), ClientError> {
        let Origin::Spawned(opts) = &self.origin else { unreachable!("only spawned sessions start servers") };
        let child = ServerProcess::start(opts)?;
        let addr = SocketAddr::from(([127, 0, 0, 1], child.port));
        self.child = Some(child);
        if let Err(e) = self.open(addr) {
            self.child = None;
            return Err(e);
        }
        Ok(())
    }

    fn open(&mut self, addr: SocketAddr) -> Result<(), ClientError> {
        let stream = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT).map_err(ClientError::Connect)?;
        stream.set_nodelay(true).map_err(ClientError::Connect)?;
        stream.set_read_timeout(Some(INTERRUPT_POLL)).map_err(ClientError::Connect)?;
        let clone = |s: &TcpStream| s.try_clone().map_err(ClientError::Connect);
        let mut conn = Conn {
            reader: BufReader::with_capacity(64 << 10, clone(&stream)?),
            writer: BufWriter::with_capacity(64 << 10, clone(&stream)?),
            stream,
        };
        write_hello(&mut CountingSink { writer: &mut conn.writer, bytes: 0 }, PROTOCOL_VERSION)?;
        conn.writer.flush().map_err(ClientError::Connect)?;
        let mut src = InterruptibleSource {
            reader: &mut conn.reader,
            flag: &self.interrupt.0,
            deadline: Some(Instant::now() + CONNECT_TIMEOUT),
            bytes: 0,
            interrupted: false,
        };
        let remote = read_hello(&mut src)?;
        if remote != PROTOCOL_VERSION {
            return Err(HandshakeError::VersionMismatch { local: PROTOCOL_VERSION, remote }.into());
        }
        debug!("session {} connected to {addr}", self.id);
        self.conn = Some(conn);
        Ok(())
    }

    /// Drops the connection and, for spawned sessions, the server process.
    /// Every proxy minted so far becomes stale.
    fn lose_connection(&mut self) {
        if let Some(conn) = self.conn.take() {
            let _ = conn.stream.shutdown(Shutdown::Both);
        }
        if let Some(mut child) = self.child.take() {
            child.kill();
        }
        self.epoch += 1;
        let mut q = self.releases.lock().unwrap_or_else(|e| e.into_inner());
        q.epoch = self.epoch;
        q.ids.clear();
    }

    fn ensure_connected(&mut self) -> Result<(), ClientError> {
        if self.conn.is_some() {
            return Ok(());
        }
        match self.origin {
            Origin::Spawned(_) => {
                debug!("session {} restarting its server", self.id);
                self.start_server()
            }
            Origin::Connected(addr) => {
                Err(ClientError::Disconnected(format!("connection to {addr} was closed; call reconnect()")))
            }
        }
    }

    /// Opens a new connection for a session made with [`connect`](Self::connect).
    pub fn reconnect(&mut self) -> Result<(), ClientError> {
        if self.conn.is_some() {
            self.lose_connection();
        }
        match self.origin {
            Origin::Connected(addr) => self.open(addr),
            Origin::Spawned(_) => self.start_server(),
        }
    }

    /// Stops whatever is running. Spawned servers are killed and restarted
    /// on next use; connected sessions close their socket and need
    /// [`reconnect`](Self::reconnect). Proxies from before become stale.
    pub fn interrupt(&mut self) {
        if self.conn.is_some() || self.child.is_some() {
            self.lose_connection();
        }
        self.interrupt.clear();
    }

    /// Handle for interrupting from a signal handler or another thread.
    pub fn interrupt_handle(&self) -> InterruptHandle {
        self.interrupt.clone()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_connected(&self) -> bool {
        self.conn.is_some()
    }

    pub fn is_spawned(&self) -> bool {
        matches!(self.origin, Origin::Spawned(_))
    }

    /// Port of the spawned server, if any.
    pub fn server_port(&self) -> Option<u16> {
        self.child.as_ref().map(|c| c.port)
    }

    pub fn stats(&self) -> WireStats {
        self.stats
    }

    pub fn set_output(&mut self, sink: impl FnMut(Channel, &str) + Send + 'static) {
        self.output = Box::new(sink);
    }

    pub fn set_frame_tap(&mut self, tap: Option<FrameTap>) {
        self.tap = tap;
    }

    /// Number of live host functions the server can call.
    pub fn callback_count(&self) -> usize {
        self.callbacks.len()
    }

    /// Ids of dropped proxies not yet released.
    pub fn pending_releases(&self) -> usize {
        self.releases.lock().unwrap_or_else(|e| e.into_inner()).ids.len()
    }

    fn write(&mut self, frame: &Frame) -> Result<(), ClientError> {
        let conn = self.conn.as_mut().ok_or_else(|| ClientError::Disconnected("no connection".into()))?;
        let mut sink = CountingSink { writer: &mut conn.writer, bytes: 0 };
        let res = write_frame(frame, &mut sink);
        self.stats.bytes_sent += sink.bytes;
        match res {
            Ok(n) => {
                self.stats.frames_sent += 1;
                if let Some(tap) = self.tap.as_mut() {
                    tap(Direction::Sent, frame, n);
                }
                Ok(())
            }
            Err(e) => {
                self.lose_connection();
                Err(ClientError::Disconnected(format!("write failed: {e}")))
            }
        }
    }

    fn flush(&mut self) -> Result<(), ClientError> {
        let conn = self.conn.as_mut().ok_or_else(|| ClientError::Disconnected("no connection".into()))?;
        if let Err(e) = conn.writer.flush() {
            self.lose_connection();
            return Err(ClientError::Disconnected(format!("write failed: {e}")));
        }
        Ok(())
    }

    fn send(&mut self, frame: &Frame) -> Result<(), ClientError> {
        self.write(frame)?;
        self.flush()
    }

    fn recv(&mut self) -> Result<Frame, ClientError> {
        let conn = self.conn.as_mut().ok_or_else(|| ClientError::Disconnected("no connection".into()))?;
        let mut src = InterruptibleSource {
            reader: &mut conn.reader,
            flag: &self.interrupt.0,
            deadline: None,
            bytes: 0,
            interrupted: false,
        };
        let res = read_frame(&mut src);
        let (bytes, interrupted) = (src.bytes, src.interrupted);
        self.stats.bytes_received += bytes;
        match res {
            Ok(frame) => {
                self.stats.frames_received += 1;
                if let Some(tap) = self.tap.as_mut() {
                    tap(Direction::Received, &frame, bytes as usize);
                }
                Ok(frame)
            }
            Err(_) if interrupted => {
                debug!("session {} interrupted", self.id);
                self.lose_connection();
                self.interrupt.clear();
                Err(ClientError::Interrupted)
            }
            Err(e) => {
                self.lose_connection();
                Err(ClientError::Disconnected(format!("server connection lost: {e}")))
            }
        }
    }

    /// Sends queued releases. Returns how many went out.
    pub fn release_flush(&mut self) -> Result<usize, ClientError> {
        if self.pending_releases() == 0 {
            return Ok(0);
        }
        if self.conn.is_none() {
            return Err(ClientError::Disconnected(format!("{} releases pending", self.pending_releases())));
        }
        let n = self.write_releases()?;
        self.flush()?;
        Ok(n)
    }

    fn write_releases(&mut self) -> Result<usize, ClientError> {
        let ids = std::mem::take(&mut self.releases.lock().unwrap_or_else(|e| e.into_inner()).ids);
        for &id in &ids {
            self.write(&Frame::Release(id))?;
        }
        Ok(ids.len())
    }

    fn request(&mut self, frame: Frame) -> Result<Value, ClientError> {
        if self.depth == 0 {
            // A Ctrl-C that arrived while idle has nothing to interrupt.
            self.interrupt.clear();
        }
        self.ensure_connected()?;
        self.write_releases()?;
        self.send(&frame)?;
        loop {
            match self.recv()? {
                Frame::Result(v) => return Ok(v),
                Frame::Fail { message, detail } => return Err(ClientError::Remote { message, detail }),
                Frame::Out(text) => (self.output)(Channel::Out, &text),
                Frame::Err(text) => (self.output)(Channel::Err, &text),
                Frame::Call { callee: Callee::Callback(id), positional, named } => {
                    self.serve_callback(id, positional, named)?
                }
                other => {
                    self.lose_connection();
                    return Err(ClientError::Protocol(format!("unexpected {:?} frame from server", other.kind())));
                }
            }
        }
    }

    fn serve_callback(
        &mut self,
        id: u64,
        positional: Vec<Value>,
        named: Vec<(String, Value)>,
    ) -> Result<(), ClientError> {
        let epoch = self.epoch;
        let result = self.invoke_callback(id, positional, named);
        if self.epoch != epoch {
            // The session broke while the callback ran; there is nobody
            // left to answer.
            return Err(match result {
                Err(e @ (ClientError::Interrupted | ClientError::Disconnected(_))) => e,
                _ => ClientError::Interrupted,
            });
        }
        let reply = match result.and_then(|v| self.outbound(&v)) {
            Ok(v) => Frame::Result(v),
            Err(e) => Frame::Fail { message: e.to_string(), detail: e.detail().to_string() },
        };
        self.send(&reply)
    }

    fn invoke_callback(
        &mut self,
        id: u64,
        positional: Vec<Value>,
        named: Vec<(String, Value)>,
    ) -> Result<Val, ClientError> {
        let f = self
            .callbacks
            .get(id)
            .ok_or_else(|| ClientError::callback(format!("callback {id} is no longer registered")))?;
        let positional = positional.into_iter().map(|v| self.inbound(v)).collect::<Result<Vec<_>, _>>()?;
        let named =
            named.into_iter().map(|(n, v)| Ok((n, self.inbound(v)?))).collect::<Result<Vec<_>, ClientError>>()?;
        self.depth += 1;
        let out = (f.0)(self, CallArgs { positional, named });
        self.depth -= 1;
        out
    }

    fn outbound(&mut self, v: &Val) -> Result<Value, ClientError> {
        let (sid, epoch) = (self.id, self.epoch);
        let callbacks = &mut self.callbacks;
        let mut stale = None;
        let res = translate_outbound(v, &mut |x| match x {
            Extern::Proxy(p) => {
                if p.session() != sid || p.epoch() != epoch {
                    stale = Some(ClientError::Stale { id: p.id(), type_name: p.type_name().to_string() });
                    return Err(TranslateError("stale reference".into()));
                }
                Ok(Value::Ref { id: p.id(), type_name: p.type_name().to_string() })
            }
            Extern::Function(f) if f.constructor => Ok(Value::FnRef(FnTarget::TypeConstructor(f.name.clone()))),
            Extern::Function(f) => Ok(Value::FnRef(FnTarget::Named(f.name.clone()))),
            Extern::Callback(f) => Ok(Value::FnRef(FnTarget::Callback(callbacks.register(f)))),
        });
        match (res, stale) {
            (_, Some(e)) => Err(e),
            (r, None) => Ok(r?),
        }
    }

    fn inbound(&mut self, v: Value) -> Result<Val, ClientError> {
        let (sid, epoch) = (self.id, self.epoch);
        let queue = &self.releases;
        let callbacks = &self.callbacks;
        Ok(translate_inbound(v, &mut |x| match x {
            Value::Ref { id, type_name } => Ok(Extern::Proxy(Proxy::new(id, type_name, epoch, sid, Arc::clone(queue)))),
            Value::FnRef(FnTarget::Named(name)) => Ok(Extern::Function(RemoteFn { name, constructor: false })),
            Value::FnRef(FnTarget::TypeConstructor(name)) => Ok(Extern::Function(RemoteFn { name, constructor: true })),
            Value::FnRef(FnTarget::Callback(id)) => callbacks
                .get(id)
                .map(Extern::Callback)
                .ok_or_else(|| TranslateError(format!("unknown callback id {id}"))),
            other => Err(TranslateError(format!("unexpected external value {other:?}"))),
        })?)
    }

    fn check_proxy(&self, p: &Proxy) -> Result<(), ClientError> {
        if p.session() != self.id || p.epoch() != self.epoch {
            return Err(ClientError::Stale { id: p.id(), type_name: p.type_name().to_string() });
        }
        Ok(())
    }

    fn encode_args(
        &mut self,
        positional: &[Val],
        named: &[(&str, Val)],
    ) -> Result<(Vec<Value>, Vec<(String, Value)>), ClientError> {
        let pos = positional.iter().map(|v| self.outbound(v)).collect::<Result<Vec<_>, _>>()?;
        let named = named
            .iter()
            .map(|(n, v)| Ok((n.to_string(), self.outbound(v)?)))
            .collect::<Result<Vec<_>, ClientError>>()?;
        Ok((pos, named))
    }

    fn call_callee(
        &mut self,
        callee: Callee,
        positional: Vec<Val>,
        named: Vec<(&str, Val)>,
    ) -> Result<Val, ClientError> {
        let (positional, named) = self.encode_args(&positional, &named)?;
        let v = self.request(Frame::Call { callee, positional, named })?;
        self.inbound(v)
    }

    /// Calls a remote function by qualified name.
    pub fn call(&mut self, name: &str, positional: Vec<Val>) -> Result<Val, ClientError> {
        self.call_with(name, positional, Vec::new())
    }

    /// Calls a remote function with named arguments too.
    pub fn call_with(&mut self, name: &str, positional: Vec<Val>, named: Vec<(&str, Val)>) -> Result<Val, ClientError> {
        self.call_callee(Callee::Named(name.to_string()), positional, named)
    }

    /// Calls a function value: a proxy of a remote function, a remote
    /// function name, or a host function.
    pub fn apply(&mut self, f: &Val, positional: Vec<Val>, named: Vec<(&str, Val)>) -> Result<Val, ClientError> {
        match f {
            HostValue::Extern(Extern::Proxy(p)) => {
                self.check_proxy(p)?;
                self.call_callee(Callee::Reference(p.id()), positional, named)
            }
            HostValue::Extern(Extern::Function(rf)) => {
                self.call_callee(Callee::Named(rf.name.clone()), positional, named)
            }
            HostValue::Extern(Extern::Callback(h)) => {
                let named = named.into_iter().map(|(n, v)| (n.to_string(), v)).collect();
                (h.0)(self, CallArgs { positional, named })
            }
            _ => Err(ClientError::Usage("value is not callable".into())),
        }
    }

    pub fn eval(&mut self, src: &str) -> Result<Val, ClientError> {
        let v = self.request(Frame::Eval(src.to_string()))?;
        self.inbound(v)
    }

    /// Evaluates `src` with host values bound to local names.
    pub fn let_eval(&mut self, src: &str, bindings: Vec<(&str, Val)>) -> Result<Val, ClientError> {
        let (_, bindings) = self.encode_args(&[], &bindings)?;
        let v = self.request(Frame::Let { expr: src.to_string(), bindings })?;
        self.inbound(v)
    }

    /// Stores a value on the server once and returns a handle to it.
    pub fn put(&mut self, v: &Val) -> Result<Proxy, ClientError> {
        let v = self.outbound(v)?;
        let r = self.request(Frame::Put(v))?;
        match self.inbound(r)? {
            HostValue::Extern(Extern::Proxy(p)) => Ok(p),
            other => Err(ClientError::Protocol(format!("PUT answered with {other:?} instead of a reference"))),
        }
    }

    /// Fully translates the referenced object.
    pub fn fetch(&mut self, p: &Proxy) -> Result<Val, ClientError> {
        self.check_proxy(p)?;
        let v = self.request(Frame::Fetch(p.id()))?;
        self.inbound(v)
    }

    /// Fetches a table object as a host table.
    pub fn to_table(&mut self, p: &Proxy) -> Result<HostTable, ClientError> {
        self.check_proxy(p)?;
        if p.type_name() != "Base.Table" {
            return Err(ClientError::Usage(format!("not a table: proxy #{} has type {}", p.id(), p.type_name())));
        }
        match self.fetch(p)? {
            HostValue::Table(t) => Ok(t),
            other => Err(ClientError::Protocol(format!("table fetch returned {other:?}"))),
        }
    }

    /// Lists a module's members.
    pub fn scan(&mut self, module: &str, include_unexported: bool) -> Result<Vec<Symbol>, ClientError> {
        let v = self.request(Frame::Scan { module: module.to_string(), include_unexported })?;
        let table = match self.inbound(v)? {
            HostValue::Table(t) => t,
            other => return Err(ClientError::Protocol(format!("SCAN answered with {other:?}"))),
        };
        let column = |name: &str| -> Result<Vec<String>, ClientError> {
            match table.column(name).map(|c| &c.data) {
                Some(HostData::Character(v)) => Ok(v.iter().map(|s| s.clone().unwrap_or_default()).collect()),
                _ => Err(ClientError::Protocol(format!("module listing lacks a `{name}` column"))),
            }
        };
        let (names, kinds, aliases) = (column("name")?, column("kind")?, column("alias")?);
        Ok(names
            .into_iter()
            .zip(kinds)
            .zip(aliases)
            .map(|((name, kind), alias)| Symbol { name, kind, alias })
            .collect())
    }

    /// Imports a module's exported members.
    pub fn import(&mut self, module: &str) -> Result<ImportedEnv, ClientError> {
        let symbols = self.scan(module, false)?;
        ImportedEnv::new(module, symbols)
    }

    /// Imports every member, exported or not.
    pub fn import_all(&mut self, module: &str) -> Result<ImportedEnv, ClientError> {
        let symbols = self.scan(module, true)?;
        ImportedEnv::new(module, symbols)
    }

    /// Ends the session politely.
    pub fn close(mut self) -> Result<(), ClientError> {
        self.say_goodbye()
    }

    fn say_goodbye(&mut self) -> Result<(), ClientError> {
        if self.conn.is_none() {
            return Ok(());
        }
        let r = self.write_releases().and_then(|_| self.send(&Frame::ByeBye));
        if let Some(conn) = self.conn.take() {
            let _ = conn.stream.shutdown(Shutdown::Write);
        }
        r
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.say_goodbye();
    }
}
