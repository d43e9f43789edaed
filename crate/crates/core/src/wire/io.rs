use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

/// Pull-based byte source. `Ok(0)` means end of stream.
pub trait Source {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError>;
}

pub trait Sink {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), IoError>;
}

impl<S: Source + ?Sized> Source for &mut S {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError> {
        (**self).read(buf)
    }
}

impl<S: Sink + ?Sized> Sink for &mut S {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), IoError> {
        (**self).write_all(buf)
    }
}

impl Source for &[u8] {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError> {
        let n = buf.len().min(self.len());
        buf[..n].copy_from_slice(&self[..n]);
        *self = &self[n..];
        Ok(n)
    }
}

impl Sink for Vec<u8> {
    fn write_all(&mut self, buf: &[u8]) -> Result<(), IoError> {
        self.extend_from_slice(buf);
        Ok(())
    }
}

/// Serves a byte slice at most `chunk` bytes per read.
#[derive(Clone, Debug)]
pub struct ChunkedSource<'a> {
    data: &'a [u8],
    pos: usize,
    chunk: usize,
}

impl<'a> ChunkedSource<'a> {
    pub fn new(data: &'a [u8], chunk: usize) -> Self {
        assert!(chunk > 0, "chunk size must be positive");
        ChunkedSource { data, pos: 0, chunk }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

impl Source for ChunkedSource<'_> {
    fn read(&mut self, buf: &mut [u8]) -> Result<usize, IoError> {
        let n = buf.len().min(self.chunk).min(self.data.len() - self.pos);
        buf[..n].copy_from_slice(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}
