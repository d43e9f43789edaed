//! TCP server: one thread and one [`Runtime`] per connection.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use bridgewire_core::runtime::{CallbackError, Channel, Host, Runtime};
use bridgewire_core::wire::{self, read_frame, write_frame, Callee, Frame, HandshakeError, PROTOCOL_VERSION};
use bridgewire_core::Value;
use log::{debug, info, warn};

use crate::io::{ReadSource, WriteSink};

/// Stack size of connection threads. Nested callbacks and deep expressions
/// recurse on this stack.
const SESSION_STACK: usize = 256 << 20;

/// How often a long evaluation looks at the socket to see whether the
/// client went away.
const ABORT_CHECK_INTERVAL: Duration = Duration::from_millis(20);

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(host: &str, port: u16) -> io::Result<Server> {
        Ok(Server { listener: TcpListener::bind((host, port))? })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails, serving each on its
    /// own thread.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            let spawned =
                thread::Builder::new().name(format!("session {peer}")).stack_size(SESSION_STACK).spawn(move || {
                    if let Err(e) = serve_connection(stream) {
                        info!("session {peer} ended: {e}");
                    } else {
                        info!("session {peer} closed");
                    }
                });
            if let Err(e) = spawned {
                warn!("cannot start session thread: {e}");
            }
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread. Used by tests and
    /// embedding applications.
    pub fn spawn(self) -> io::Result<(SocketAddr, thread::JoinHandle<io::Result<()>>)> {
        let addr = self.local_addr()?;
        let handle = thread::Builder::new().name("bridgewire accept".into()).spawn(move || self.run())?;
        Ok((addr, handle))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("handshake failed: {0}")]
    Handshake(#[from] HandshakeError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

struct Connection {
    reader: ReadSource<BufReader<TcpStream>>,
    writer: WriteSink<BufWriter<TcpStream>>,
    probe: TcpStream,
    closed: bool,
    polls: u32,
    last_check: Instant,
}

impl Connection {
    fn send(&mut self, frame: &Frame) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::Protocol("connection closed".into()));
        }
        let result = write_frame(frame, &mut self.writer)
            .map_err(|e| SessionError::Protocol(e.to_string()))
            .and_then(|_| self.writer.flush().map_err(SessionError::Io));
        if result.is_err() {
            self.closed = true;
        }
        result
    }

    /// True when the peer has closed its end. Never blocks.
    fn peer_gone(&mut self) -> bool {
        if self.probe.set_nonblocking(true).is_err() {
            return true;
        }
        let gone = match self.probe.peek(&mut [0u8; 1]) {
            Ok(0) => true,
            Ok(_) => false,
            Err(e) => e.kind() != io::ErrorKind::WouldBlock,
        };
        let _ = self.probe.set_nonblocking(false);
        gone
    }
}

impl Host for Connection {
    fn emit(&mut self, channel: Channel, text: &str) {
        let frame = match channel {
            Channel::Out => Frame::Out(text.to_string()),
            Channel::Err => Frame::Err(text.to_string()),
        };
        // Output must never fail an evaluation; a dead socket shows up at
        // the next abort check.
        let _ = self.send(&frame);
    }

    fn call_callback(
        &mut self,
        rt: &mut Runtime,
        id: u64,
        positional: Vec<Value>,
        named: Vec<(String, Value)>,
    ) -> Result<Value, CallbackError> {
        let aborted = || CallbackError { message: "connection lost".into(), detail: String::new(), aborted: true };
        self.send(&Frame::Call { callee: Callee::Callback(id), positional, named }).map_err(|_| aborted())?;
        loop {
            let frame = match read_frame(&mut self.reader) {
                Ok(f) => f,
                Err(e) => {
                    debug!("read failed while awaiting callback {id}: {e}");
                    self.closed = true;
                    return Err(aborted());
                }
            };
            match frame {
                Frame::Result(v) => return Ok(v),
                Frame::Fail { message, detail } => return Err(CallbackError { message, detail, aborted: false }),
                Frame::ByeBye | Frame::Out(_) | Frame::Err(_) => {
                    self.closed = true;
                    return Err(aborted());
                }
                request => match rt.handle(self, request) {
                    Ok(Some(reply)) => self.send(&reply).map_err(|_| aborted())?,
                    Ok(None) => {}
                    Err(_) => return Err(aborted()),
                },
            }
        }
    }

    fn should_abort(&mut self) -> bool {
        if self.closed {
            return true;
        }
        self.polls = self.polls.wrapping_add(1);
        if !self.polls.is_multiple_of(256) || self.last_check.elapsed() < ABORT_CHECK_INTERVAL {
            return false;
        }
        self.last_check = Instant::now();
        if self.peer_gone() {
            debug!("peer closed the connection during evaluation");
            self.closed = true;
        }
        self.closed
    }
}

/// Serves one client until BYEBYE, disconnect or a protocol error.
pub fn serve_connection(stream: TcpStream) -> Result<(), SessionError> {
    stream.set_nodelay(true)?;
    let mut conn = Connection {
        reader: ReadSource(BufReader::with_capacity(64 << 10, stream.try_clone()?)),
        writer: WriteSink(BufWriter::with_capacity(64 << 10, stream.try_clone()?)),
        probe: stream,
        closed: false,
        polls: 0,
        last_check: Instant::now(),
    };
    let remote = wire::read_hello(&mut conn.reader)?;
    wire::write_hello(&mut conn.writer, PROTOCOL_VERSION)?;
    conn.writer.flush()?;
    if remote != PROTOCOL_VERSION {
        return Err(HandshakeError::VersionMismatch { local: PROTOCOL_VERSION, remote }.into());
    }
    let mut rt = Runtime::new();
    loop {
        let frame = match read_frame(&mut conn.reader) {
            Ok(f) => f,
            Err(e) if e.is_eof() => return Ok(()),
            Err(e) => return Err(SessionError::Protocol(e.to_string())),
        };
        debug!("request {:?}", frame.kind());
        match frame {
            Frame::ByeBye => return Ok(()),
            Frame::Result(_) | Frame::Fail { .. } | Frame::Out(_) | Frame::Err(_) => {
                return Err(SessionError::Protocol(format!(
                    "unexpected {:?} frame with no callback pending",
                    frame.kind()
                )));
            }
            request => match rt.handle(&mut conn, request) {
                Ok(Some(reply)) => conn.send(&reply)?,
                Ok(None) => {}
                Err(_) => return Ok(()),
            },
        }
    }
}
