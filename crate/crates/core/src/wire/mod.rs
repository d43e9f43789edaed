//! Binary codec and framing.
//!
//! Everything is little-endian and self-delimiting: a decoder pulls exactly
//! the bytes of one value or frame from a [`Source`] and never needs a
//! length prefix for the whole message. Sources may hand out bytes in
//! arbitrarily small pieces.

mod codec;
mod frame;
mod handshake;
mod io;

pub use codec::{decode_value, decode_value_from_slice, encode_value, encode_value_to_vec, MAX_NESTING};
pub use frame::{read_frame, read_frame_from_slice, write_frame, write_frame_to_vec, Callee, Frame, FrameKind};
pub use handshake::{handshake, read_hello, write_hello, HandshakeError, Role, MAGIC, PROTOCOL_VERSION};
pub use io::{ChunkedSource, IoError, Sink, Source};

use alloc::string::String;
use thiserror::Error;

use crate::value::ValueError;

/// Codec failure. Offsets count bytes from the start of the value or frame
/// being decoded.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("premature end of stream at byte {offset}")]
    UnexpectedEof { offset: u64 },
    #[error("unknown value tag 0x{tag:02x} at byte {offset}")]
    UnknownTag { tag: u8, offset: u64 },
    #[error("unknown element type 0x{code:02x} at byte {offset}")]
    UnknownElemType { code: u8, offset: u64 },
    #[error("unknown frame kind 0x{kind:02x} at byte {offset}")]
    UnknownFrameKind { kind: u8, offset: u64 },
    #[error("unknown callee kind 0x{kind:02x} at byte {offset}")]
    UnknownCalleeKind { kind: u8, offset: u64 },
    #[error("unknown function reference kind 0x{kind:02x} at byte {offset}")]
    UnknownFnKind { kind: u8, offset: u64 },
    #[error("reserved flag bits 0x{flags:02x} set at byte {offset}")]
    BadFlags { flags: u8, offset: u64 },
    #[error("negative dimension {dim} at byte {offset}")]
    NegativeDim { dim: i64, offset: u64 },
    #[error("dims product overflows the element cap at byte {offset}")]
    DimsOverflow { offset: u64 },
    #[error("string is not valid UTF-8 at byte {offset}")]
    InvalidUtf8 { offset: u64 },
    #[error("boolean byte 0x{byte:02x} at byte {offset}")]
    InvalidBool { byte: u8, offset: u64 },
    #[error("missing slot has a non-zero placeholder at byte {offset}")]
    NonZeroPlaceholder { offset: u64 },
    #[error("nesting deeper than {MAX_NESTING} levels at byte {offset}")]
    TooDeep { offset: u64 },
    #[error("id 0 is reserved (byte {offset})")]
    ReservedId { offset: u64 },
    #[error("length {len} does not fit the u32 length field")]
    TooLong { len: usize },
    #[error("malformed value at byte {offset}: {source}")]
    Invalid { offset: u64, source: ValueError },
    #[error("i/o error: {0}")]
    Io(String),
}

impl WireError {
    pub fn is_eof(&self) -> bool {
        matches!(self, WireError::UnexpectedEof { .. })
    }
}

impl From<IoError> for WireError {
    fn from(e: IoError) -> Self {
        WireError::Io(e.0)
    }
}
