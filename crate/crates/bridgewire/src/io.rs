//! Adapters between `std::io` streams and the codec's byte traits.

use std::io::{self, Read, Write};

use bridgewire_core::wire::{IoError, Sink, Source};

fn io_error(e: io::Error) -> IoError {
    IoError(e.to_string())
}

/// A [`Source`] over any reader.
pub struct ReadSource<R>(pub R);

impl<R: Read> Source for ReadSource<R> {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError> {
        loop {
            match self.0.read(buf) {
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                other => return other.map_err(io_error),
            }
        }
    }
}

/// A [`Sink`] over any writer.
pub struct WriteSink<W>(pub W);

impl<W: Write> Sink for WriteSink<W> {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), IoError> {
        self.0.write_all(buf).map_err(io_error)
    }
}

impl<W: Write> WriteSink<W> {
    pub fn flush(&mut self) -> io::Result<()> {
        self.0.flush()
    }
}
