use alloc::string::String;

use thiserror::Error;

use super::io::{IoError, Sink, Source};

pub const MAGIC: [u8; 4] = *b"BWR1";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Client,
    Server,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HandshakeError {
    #[error("bad magic {0:02x?}: peer does not speak this protocol")]
    BadMagic([u8; 4]),
    #[error("protocol version mismatch: local {local}, remote {remote}")]
    VersionMismatch { local: u32, remote: u32 },
    #[error("connection closed during handshake")]
    Closed,
    #[error("i/o error during handshake: {0}")]
    Io(String),
}

impl From<IoError> for HandshakeError {
    fn from(e: IoError) -> Self {
        HandshakeError::Io(e.0)
    }
}

pub fn write_hello<S: Sink + ?Sized>(sink: &mut S, version: u32) -> Result<(), HandshakeError> {
    let mut hello = [0u8; 8];
    hello[..4].copy_from_slice(&MAGIC);
    hello[4..].copy_from_slice(&version.to_le_bytes());
    sink.write_all(&hello)?;
    Ok(())
}

/// Reads the peer's magic and version. The magic is checked before the
/// version bytes are even requested.
pub fn read_hello<S: Source + ?Sized>(src: &mut S) -> Result<u32, HandshakeError> {
    let mut magic = [0u8; 4];
    fill(src, &mut magic)?;
    if magic != MAGIC {
        return Err(HandshakeError::BadMagic(magic));
    }
    let mut version = [0u8; 4];
    fill(src, &mut version)?;
    Ok(u32::from_le_bytes(version))
}

fn fill<S: Source + ?Sized>(src: &mut S, buf: &mut [u8]) -> Result<(), HandshakeError> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..])? {
            0 => return Err(HandshakeError::Closed),
            n => filled += n,
        }
    }
    Ok(())
}

/// Runs the opening exchange. The client speaks first; the server answers
/// with its own version even when they differ, so both sides can report the
/// mismatch. The caller closes the connection on any error.
pub fn handshake<S: Source + Sink + ?Sized>(role: Role, stream: &mut S, version: u32) -> Result<u32, HandshakeError> {
    let remote = match role {
        Role::Client => {
            write_hello(stream, version)?;
            read_hello(stream)?
        }
        Role::Server => {
            let remote = read_hello(stream)?;
            write_hello(stream, version)?;
            remote
        }
    };
    if remote != version {
        return Err(HandshakeError::VersionMismatch { local: version, remote });
    }
    Ok(version)
}
